#include "sgbayes/forward_model.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace sgbayes {

const char* to_string(Backend backend) noexcept {
    switch (backend) {
        case Backend::analytic: return "analytic";
        case Backend::synthetic_les: return "synthetic-les";
        case Backend::external: return "external";
    }
    return "unknown";
}

ForwardModel::ForwardModel(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.input_dim == 0 || spec_.output_dim == 0)
        throw ConfigurationError("model '" + spec_.name + "' needs positive input and output dimensions");
    if (spec_.domain.dim() != spec_.input_dim)
        throw ConfigurationError("model '" + spec_.name + "' domain dimension does not match its input dimension");
}

Eigen::VectorXd ForwardModel::evaluate(const Eigen::VectorXd& theta) const {
    if (!spec_.domain.contains(theta))
        throw DomainError("parameter point outside the domain of model '" + spec_.name + "'");
    Eigen::VectorXd out = do_evaluate(theta);
    if (static_cast<std::size_t>(out.size()) != spec_.output_dim)
        throw ModelExecutionError("model '" + spec_.name + "' returned the wrong number of outputs", "", "");
    return out;
}

std::vector<Eigen::VectorXd> evaluate_batch(const ForwardModel& model,
                                            std::span<const Eigen::VectorXd> points,
                                            std::size_t jobs, const ResultSink& on_result) {
    std::vector<Eigen::VectorXd> out(points.size());
    jobs = std::max<std::size_t>(1, std::min(jobs, points.size()));
    if (jobs == 1) {
        for (std::size_t k = 0; k < points.size(); ++k) {
            out[k] = model.evaluate(points[k]);
            if (on_result) on_result(k, out[k]);
        }
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::mutex sink_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= points.size()) return;
            try {
                out[k] = model.evaluate(points[k]);
                if (on_result) {
                    std::lock_guard lock(sink_mutex);
                    on_result(k, out[k]);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = points.size();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

CountingModel::CountingModel(std::shared_ptr<const ForwardModel> inner)
    : ForwardModel(inner->spec()), inner_(std::move(inner)) {}

Eigen::VectorXd CountingModel::do_evaluate(const Eigen::VectorXd& theta) const {
    ++count_;
    return inner_->evaluate(theta);
}

AnalyticKind analytic_kind_from_string(const std::string& name) {
    if (name == "gaussian-peak") return AnalyticKind::gaussian_peak;
    if (name == "oscillatory") return AnalyticKind::oscillatory;
    if (name == "product-peak") return AnalyticKind::product_peak;
    if (name == "corner-peak") return AnalyticKind::corner_peak;
    if (name == "continuous") return AnalyticKind::continuous;
    if (name == "multilinear") return AnalyticKind::multilinear;
    throw ConfigurationError("unknown analytic model '" + name + "'");
}

const char* to_string(AnalyticKind kind) noexcept {
    switch (kind) {
        case AnalyticKind::gaussian_peak: return "gaussian-peak";
        case AnalyticKind::oscillatory: return "oscillatory";
        case AnalyticKind::product_peak: return "product-peak";
        case AnalyticKind::corner_peak: return "corner-peak";
        case AnalyticKind::continuous: return "continuous";
        case AnalyticKind::multilinear: return "multilinear";
    }
    return "unknown";
}

AnalyticModel::AnalyticModel(AnalyticKind kind, Box domain, Eigen::VectorXd weights, Eigen::VectorXd shifts)
    : ForwardModel(ModelSpec{to_string(kind), domain.dim(), 1, domain, Backend::analytic}),
      kind_(kind), weights_(std::move(weights)), shifts_(std::move(shifts)) {
    if (static_cast<std::size_t>(weights_.size()) != input_dim() ||
        static_cast<std::size_t>(shifts_.size()) != input_dim())
        throw ConfigurationError("analytic model weights/shifts must match the input dimension");
}

AnalyticModel::AnalyticModel(AnalyticKind kind, Box domain)
    : AnalyticModel(kind, domain, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(domain.dim())),
                    domain.center()) {}

Eigen::VectorXd AnalyticModel::do_evaluate(const Eigen::VectorXd& theta) const {
    const auto d = (theta - shifts_).array();
    const auto& a = weights_.array();
    double value = 0.0;
    switch (kind_) {
        case AnalyticKind::gaussian_peak:
            value = std::exp(-(a * d.square()).sum());
            break;
        case AnalyticKind::oscillatory:
            value = std::cos(2.0 * std::numbers::pi * shifts_[0] + (a * theta.array()).sum());
            break;
        case AnalyticKind::product_peak:
            value = (1.0 / (a.square().inverse() + d.square())).prod();
            break;
        case AnalyticKind::corner_peak:
            value = std::pow(1.0 + (a * theta.array()).sum(), -static_cast<double>(input_dim() + 1));
            break;
        case AnalyticKind::continuous:
            value = std::exp(-(a * d.abs()).sum());
            break;
        case AnalyticKind::multilinear:
            value = (1.0 + a * d).prod();
            break;
    }
    return Eigen::VectorXd::Constant(1, value);
}

}  // namespace sgbayes
