#include "sgbayes/synthetic_les.hpp"

namespace sgbayes {

Eigen::VectorXd SyntheticLesConfig::y_plus() const {
    if (stations == 1) return Eigen::VectorXd::Constant(1, y_plus_first);
    return Eigen::VectorXd::LinSpaced(stations, y_plus_first, y_plus_last);
}

Eigen::VectorXd SyntheticLesConfig::eta() const {
    Eigen::VectorXd out(stations);
    for (int s = 0; s < stations; ++s) out[s] = (y_first + y_step * s - y_center) / y_scale;
    return out;
}

namespace {

ModelSpec les_spec(const SyntheticLesConfig& config) {
    if (config.stations < 1) throw ConfigurationError("synthetic-les needs at least one station");
    if (config.domain.dim() != 3) throw ConfigurationError("synthetic-les takes exactly three parameters");
    if (!(config.delta_coarse > config.delta_fine) || !(config.length_ref > 0.0) || !(config.a_plus > 0.0))
        throw ConfigurationError("synthetic-les resolution range, reference length and A+ must be positive");
    if ((config.domain.lower().array() < 0.0).any() || config.domain.lower()[2] <= 0.0)
        throw ConfigurationError("synthetic-les domain requires C_S >= 0, p >= 0 and delta > 0");
    return ModelSpec{"synthetic-les", 3, static_cast<std::size_t>(config.stations * SyntheticLesConfig::quantities),
                     config.domain, Backend::synthetic_les};
}

}  // namespace

SyntheticLesModel::SyntheticLesModel(SyntheticLesConfig config)
    : ForwardModel(les_spec(config)), config_(std::move(config)), y_plus_(config_.y_plus()), eta_(config_.eta()) {}

Eigen::VectorXd SyntheticLesModel::length_scales(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd ell(config_.stations);
    for (int s = 0; s < config_.stations; ++s)
        ell[s] = van_driest(theta[0], theta[2], theta[1], y_plus_[s], config_.a_plus, config_.n);
    return ell;
}

Eigen::VectorXd SyntheticLesModel::dissipation_factors(const Eigen::VectorXd& theta) const {
    return (length_scales(theta) / config_.length_ref).array().square();
}

Eigen::VectorXd SyntheticLesModel::profiles(const Eigen::VectorXd& length_scales, double delta) const {
    const Eigen::Index S = config_.stations;
    const Eigen::ArrayXd q = length_scales.array() / config_.length_ref;
    const double D = q.square().mean();
    const double dn = (delta - config_.delta_fine) / (config_.delta_coarse - config_.delta_fine);
    const Eigen::ArrayXd& eta = eta_.array();

    const double w = 0.35 * (1.0 + 0.5 * std::tanh(D)) * (1.0 + 0.6 * dn);
    const Eigen::ArrayXd z = (eta - 0.8 * dn) / w;
    const Eigen::ArrayXd g = (-z.square()).exp();
    const double amp_u = 1.4 * std::exp(-0.5 * D) * (1.0 - 0.6 * dn);
    const Eigen::ArrayXd R = 3.0 * (-1.5 * q).exp() * (1.0 - 0.7 * dn);
    const double penalty = 0.3 * std::exp(8.0 * (dn - 1.0));
    const Eigen::ArrayXd osc = 1.0 + penalty * (20.0 * dn + 6.0 * eta + 2.0 * D).sin();

    Eigen::VectorXd out(S * SyntheticLesConfig::quantities);
    out.segment(0 * S, S) = 1.0 - amp_u * g;
    out.segment(1 * S, S) = 0.6 * std::exp(-0.3 * D) * z * g;
    out.segment(2 * S, S) = (1.2 * R * z.square() * g + 0.02 + 0.5 * R) * osc;
    out.segment(3 * S, S) = (0.9 * R * g + 0.5 * R) * osc;
    out.segment(4 * S, S) = -0.6 * R * z * g * osc;
    return out;
}

Eigen::VectorXd SyntheticLesModel::do_evaluate(const Eigen::VectorXd& theta) const {
    return profiles(length_scales(theta), theta[2]);
}

}  // namespace sgbayes
