#include "sgbayes/bayes.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>

namespace sgbayes {

double PriorSpec::log_density(const Eigen::VectorXd& theta) const {
    if (!box.contains(theta)) return -std::numeric_limits<double>::infinity();
    return -box.width().array().log().sum();
}

const char* to_string(LikelihoodKind kind) noexcept { return kind == LikelihoodKind::mvn ? "MVN" : "EXP"; }

LikelihoodKind likelihood_kind_from_string(const std::string& name) {
    if (name == "MVN" || name == "mvn") return LikelihoodKind::mvn;
    if (name == "EXP" || name == "exp") return LikelihoodKind::exp;
    throw ConfigurationError("unknown likelihood kind '" + name + "'");
}

LikelihoodSpec LikelihoodSpec::mvn(Eigen::VectorXd data, double sigma) {
    LikelihoodSpec spec;
    spec.kind = LikelihoodKind::mvn;
    spec.sigma = Eigen::VectorXd::Constant(data.size(), sigma);
    spec.data = std::move(data);
    spec.validate();
    return spec;
}

LikelihoodSpec LikelihoodSpec::exp(Eigen::VectorXd data, double zeta) {
    LikelihoodSpec spec;
    spec.kind = LikelihoodKind::exp;
    spec.data = std::move(data);
    spec.zeta = zeta;
    spec.validate();
    return spec;
}

void LikelihoodSpec::validate() const {
    if (data.size() == 0) throw ConfigurationError("likelihood has no reference data");
    if (!data.allFinite()) throw ConfigurationError("reference data contain non-finite values");
    if (kind == LikelihoodKind::mvn) {
        if (sigma.size() != data.size())
            throw ConfigurationError("MVN likelihood needs one sigma per datum");
        if (!(sigma.array() > 0.0).all()) throw ConfigurationError("MVN likelihood: sigma must be positive");
    } else {
        if (!(zeta > 0.0)) throw ConfigurationError("EXP likelihood: zeta must be positive");
        if (!((data.array() - data.mean()).square().sum() > 0.0))
            throw ConfigurationError("EXP likelihood: reference data are constant");
    }
}

double LikelihoodSpec::log_likelihood(const Eigen::VectorXd& prediction) const {
    return kind == LikelihoodKind::mvn ? log_likelihood_mvn(data, prediction, sigma)
                                       : log_likelihood_exp(data, prediction, zeta);
}

Posterior::Posterior(PriorSpec prior, LikelihoodSpec likelihood, std::shared_ptr<const ForwardModel> model)
    : prior_(std::move(prior)), likelihood_(std::move(likelihood)), model_(std::move(model)) {
    if (!model_) throw ConfigurationError("posterior needs a model");
    check(model_->domain(), model_->output_dim());
}

Posterior::Posterior(PriorSpec prior, LikelihoodSpec likelihood, std::shared_ptr<const SurrogateModel> surrogate)
    : prior_(std::move(prior)), likelihood_(std::move(likelihood)), surrogate_(std::move(surrogate)) {
    if (!surrogate_) throw ConfigurationError("posterior needs a surrogate");
    if (surrogate_->size() == 0) throw ConfigurationError("posterior surrogate is empty");
    check(surrogate_->domain(), surrogate_->output_dim());
}

void Posterior::check(const Box& evaluator_domain, std::size_t output_dim) const {
    likelihood_.validate();
    if (prior_.box.dim() != evaluator_domain.dim())
        throw ConfigurationError("prior dimension does not match the model input dimension");
    if ((prior_.box.lower().array() < evaluator_domain.lower().array()).any() ||
        (prior_.box.upper().array() > evaluator_domain.upper().array()).any())
        throw ConfigurationError("prior box extends beyond the model domain");
    if (static_cast<std::size_t>(likelihood_.data.size()) != output_dim)
        throw ConfigurationError("reference data length " + std::to_string(likelihood_.data.size()) +
                                 " does not match model output dimension " + std::to_string(output_dim));
}

Eigen::VectorXd Posterior::predict(const Eigen::VectorXd& theta) const {
    return surrogate_ ? surrogate_->eval(theta) : model_->evaluate(theta);
}

double Posterior::log_posterior(const Eigen::VectorXd& theta) const {
    const double lp = prior_.log_density(theta);
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
    return likelihood_.log_likelihood(predict(theta)) + lp;
}

Eigen::VectorXd make_reference_data(const ForwardModel& model, const Eigen::VectorXd& theta_star, double sigma,
                                    std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw ConfigurationError("noise level must be non-negative");
    Eigen::VectorXd d = model.evaluate(theta_star);
    if (sigma == 0.0) return d;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index k = 0; k < d.size(); ++k) d[k] += noise(rng);
    return d;
}

void write_reference_data(const std::filesystem::path& path, const Eigen::VectorXd& data) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot write reference data to " + path.string());
    out << "index,value\n";
    char buf[40];
    for (Eigen::Index k = 0; k < data.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", data[k]);
        out << k << ',' << buf << '\n';
    }
    if (!out.flush()) throw ConfigurationError("cannot write reference data to " + path.string());
}

Eigen::VectorXd read_reference_data(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("reference data file not found: " + path.string());
    std::string line;
    if (!std::getline(in, line) || (line != "index,value" && line != "index,value\r"))
        throw ConfigurationError(path.string() + ": expected header 'index,value'");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        std::size_t index = 0;
        double value = 0.0;
        bool ok = comma != std::string::npos;
        if (ok) {
            auto [p1, e1] = std::from_chars(line.data(), line.data() + comma, index);
            auto [p2, e2] = std::from_chars(line.data() + comma + 1, line.data() + line.size(), value);
            ok = e1 == std::errc{} && p1 == line.data() + comma && e2 == std::errc{} &&
                 p2 == line.data() + line.size() && index == values.size();
        }
        if (!ok) throw ConfigurationError(path.string() + ": malformed row '" + line + "'");
        values.push_back(value);
    }
    if (values.empty()) throw ConfigurationError(path.string() + ": no data rows");
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace sgbayes
