#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "sgbayes/error.hpp"
#include "sgbayes/forward_model.hpp"
#include "sgbayes/surrogate.hpp"

namespace sgbayes {

/// -½ Σ ((d_k - f_k) / σ_k)²
template <typename D, typename F, typename S>
double log_likelihood_mvn(const Eigen::MatrixBase<D>& d, const Eigen::MatrixBase<F>& f,
                          const Eigen::MatrixBase<S>& sigma) {
    if (d.size() != f.size() || d.size() != sigma.size())
        throw ConfigurationError("MVN likelihood: data, prediction and sigma lengths differ");
    if (!(sigma.array() > 0.0).all()) throw ConfigurationError("MVN likelihood: sigma must be positive");
    return -0.5 * ((d - f).array() / sigma.array()).square().sum();
}

/// -ζ Σ ((d_k - f_k) - (d̄ - f̄))² / Σ (d_k - d̄)²
template <typename D, typename F>
double log_likelihood_exp(const Eigen::MatrixBase<D>& d, const Eigen::MatrixBase<F>& f, double zeta) {
    if (d.size() != f.size() || d.size() == 0)
        throw ConfigurationError("EXP likelihood: data and prediction lengths differ");
    if (!(zeta > 0.0)) throw ConfigurationError("EXP likelihood: zeta must be positive");
    const double denom = (d.array() - d.mean()).square().sum();
    if (!(denom > 0.0)) throw ConfigurationError("EXP likelihood: reference data are constant");
    const Eigen::ArrayXd r = (d - f).array();
    return -zeta * (r - r.mean()).square().sum() / denom;
}

/// Uniform product prior on a box.
struct PriorSpec {
    Box box;

    /// Log density, -inf outside the box.
    double log_density(const Eigen::VectorXd& theta) const;
};

enum class LikelihoodKind { mvn, exp };

const char* to_string(LikelihoodKind kind) noexcept;
LikelihoodKind likelihood_kind_from_string(const std::string& name);

struct LikelihoodSpec {
    LikelihoodKind kind = LikelihoodKind::mvn;
    Eigen::VectorXd data;
    /// Per-datum standard deviation (MVN).
    Eigen::VectorXd sigma;
    /// Scaling constant (EXP).
    double zeta = 500.0;

    static LikelihoodSpec mvn(Eigen::VectorXd data, double sigma);
    static LikelihoodSpec exp(Eigen::VectorXd data, double zeta);

    /// Throws ConfigurationError if the spec is unusable.
    void validate() const;
    double log_likelihood(const Eigen::VectorXd& prediction) const;
};

/// Log posterior up to normalization, evaluated through either the true model
/// or a surrogate of it. Immutable once built; safe to call concurrently.
class Posterior {
public:
    Posterior(PriorSpec prior, LikelihoodSpec likelihood, std::shared_ptr<const ForwardModel> model);
    Posterior(PriorSpec prior, LikelihoodSpec likelihood, std::shared_ptr<const SurrogateModel> surrogate);

    const PriorSpec& prior() const noexcept { return prior_; }
    const LikelihoodSpec& likelihood() const noexcept { return likelihood_; }
    bool uses_surrogate() const noexcept { return surrogate_ != nullptr; }
    std::size_t dim() const noexcept { return prior_.box.dim(); }

    /// Model or surrogate output at θ; θ must lie in the prior box.
    Eigen::VectorXd predict(const Eigen::VectorXd& theta) const;

    double log_posterior(const Eigen::VectorXd& theta) const;

private:
    void check(const Box& evaluator_domain, std::size_t output_dim) const;

    PriorSpec prior_;
    LikelihoodSpec likelihood_;
    std::shared_ptr<const ForwardModel> model_;
    std::shared_ptr<const SurrogateModel> surrogate_;
};

/// d = f(θ*) + ε with ε_k ~ N(0, σ²) drawn from a generator seeded by `seed`.
Eigen::VectorXd make_reference_data(const ForwardModel& model, const Eigen::VectorXd& theta_star, double sigma,
                                    std::uint64_t seed);

/// CSV with header `index,value`, one row per datum (index from 0).
void write_reference_data(const std::filesystem::path& path, const Eigen::VectorXd& data);
Eigen::VectorXd read_reference_data(const std::filesystem::path& path);

}  // namespace sgbayes
