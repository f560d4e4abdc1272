#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "sgbayes/forward_model.hpp"

namespace sgbayes {

/// Damped Smagorinsky length scale ℓ_S = C_S δ (1 - exp(-(y⁺)^n / (A⁺)^n))^p.
/// With p = 0 no damping is applied, including at the wall.
template <typename Scalar>
Scalar van_driest(Scalar c_s, Scalar delta, Scalar p, Scalar y_plus, Scalar a_plus = Scalar(25), Scalar n = Scalar(1)) {
    using std::exp;
    using std::pow;
    if (p == Scalar(0)) return c_s * delta;
    const Scalar damping = Scalar(1) - exp(-pow(y_plus, n) / pow(a_plus, n));
    return c_s * delta * pow(damping, p);
}

struct SyntheticLesConfig {
    /// (C_S, p, δ)
    Eigen::Vector3d true_theta{0.15, 0.5, std::numbers::pi / 480};
    Box domain{Eigen::Vector3d(0.0, 0.0, std::numbers::pi / 600), Eigen::Vector3d(0.2, 2.0, std::numbers::pi / 200)};
    int stations = 11;
    /// Vertical station positions run from y_first in steps of y_step; the wake
    /// centre sits at y_center with nominal half-width y_scale.
    double y_first = 0.6;
    double y_step = 0.02;
    double y_center = 0.7;
    double y_scale = 0.1;
    /// Wall-unit distance of each station, spaced linearly.
    double y_plus_first = 2.0;
    double y_plus_last = 40.0;
    double a_plus = 25.0;
    double n = 1.0;
    /// Filter widths of the finest and coarsest resolution the response is tuned for.
    double delta_fine = std::numbers::pi / 600;
    double delta_coarse = std::numbers::pi / 200;
    /// Length scale the dissipation factor is normalized by.
    double length_ref = 0.1 * std::numbers::pi / 480;

    static constexpr int quantities = 5;

    Eigen::VectorXd y_plus() const;
    Eigen::VectorXd eta() const;
};

/// Cheap three-parameter stand-in for a wake-flow LES. Each of the 11 stations
/// yields U, V, <u'u'>, <v'v'>, <u'v'>; the output vector is laid out by
/// quantity (all U first, then all V, ...).
///
/// Per station s, with q_s = ℓ_S(y⁺_s)/length_ref, ν_s = q_s², D = mean ν_s,
/// δn = (δ - delta_fine)/(delta_coarse - delta_fine) and η_s the centred
/// station coordinate:
///   w   = 0.35 (1 + 0.5 tanh D)(1 + 0.6 δn)       wake width
///   z   = (η - 0.8 δn) / w,   g = exp(-z²)
///   A_U = 1.4 exp(-0.5 D)(1 - 0.6 δn)             deficit amplitude
///   R   = 3 exp(-1.5 q)(1 - 0.7 δn)               resolved stress level
///   P   = 0.3 exp(8 (δn - 1))                     coarse-resolution penalty
///   osc = 1 + P sin(20 δn + 6 η + 2 D)
///   U     = 1 - A_U g
///   V     = 0.6 z g exp(-0.3 D)
///   <u'u'> = (1.2 R z² g + 0.02 + 0.5 R) osc
///   <v'v'> = (0.9 R g + 0.5 R) osc
///   <u'v'> = -0.6 R z g osc
class SyntheticLesModel final : public ForwardModel {
public:
    explicit SyntheticLesModel(SyntheticLesConfig config = {});

    const SyntheticLesConfig& config() const noexcept { return config_; }

    /// ν_s per station.
    Eigen::VectorXd dissipation_factors(const Eigen::VectorXd& theta) const;

    /// Profiles given the per-station length scales directly.
    Eigen::VectorXd profiles(const Eigen::VectorXd& length_scales, double delta) const;

protected:
    Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const override;

private:
    Eigen::VectorXd length_scales(const Eigen::VectorXd& theta) const;

    SyntheticLesConfig config_;
    Eigen::VectorXd y_plus_;
    Eigen::VectorXd eta_;
};

}  // namespace sgbayes
