#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgbayes/grid_core.hpp"

namespace sgbayes {

enum class Backend { analytic, synthetic_les, external };

const char* to_string(Backend backend) noexcept;

struct ModelSpec {
    std::string name;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Box domain;
    Backend backend = Backend::analytic;
};

/// A deterministic parameter-to-observable map f: Ω -> R^{N_d}.
class ForwardModel {
public:
    explicit ForwardModel(ModelSpec spec);
    virtual ~ForwardModel() = default;

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t output_dim() const noexcept { return spec_.output_dim; }
    const Box& domain() const noexcept { return spec_.domain; }

    /// Throws DomainError if theta is outside the domain.
    Eigen::VectorXd evaluate(const Eigen::VectorXd& theta) const;

protected:
    virtual Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const = 0;

private:
    ModelSpec spec_;
};

using ResultSink = std::function<void(std::size_t, const Eigen::VectorXd&)>;

/// Evaluates `model` at every point, running up to `jobs` evaluations at a
/// time. `on_result` (if set) sees each finished evaluation, one call at a
/// time. After a failure no new evaluations start; the first exception is
/// rethrown once the running ones finish.
std::vector<Eigen::VectorXd> evaluate_batch(const ForwardModel& model,
                                            std::span<const Eigen::VectorXd> points,
                                            std::size_t jobs = 1, const ResultSink& on_result = {});

/// Decorator counting calls that reach the wrapped model.
class CountingModel final : public ForwardModel {
public:
    explicit CountingModel(std::shared_ptr<const ForwardModel> inner);

    std::size_t count() const noexcept { return count_.load(); }
    void reset() noexcept { count_ = 0; }

protected:
    Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const override;

private:
    std::shared_ptr<const ForwardModel> inner_;
    mutable std::atomic<std::size_t> count_{0};
};

// ---------------------------------------------------------------------------
// Analytic test models (Genz-type families plus a multilinear one)
// ---------------------------------------------------------------------------

enum class AnalyticKind { gaussian_peak, oscillatory, product_peak, corner_peak, continuous, multilinear };

AnalyticKind analytic_kind_from_string(const std::string& name);
const char* to_string(AnalyticKind kind) noexcept;

/// Scalar-valued closed-form model on a box. With weights a and shifts u:
///   gaussian-peak  exp(-Σ a_n (θ_n - u_n)^2)
///   oscillatory    cos(2π u_1 + Σ a_n θ_n)
///   product-peak   Π 1 / (a_n^-2 + (θ_n - u_n)^2)
///   corner-peak    (1 + Σ a_n θ_n)^-(N+1)
///   continuous     exp(-Σ a_n |θ_n - u_n|)
///   multilinear    Π (1 + a_n (θ_n - u_n))
class AnalyticModel final : public ForwardModel {
public:
    AnalyticModel(AnalyticKind kind, Box domain, Eigen::VectorXd weights, Eigen::VectorXd shifts);

    /// Default weights 1 and shifts at the box center.
    AnalyticModel(AnalyticKind kind, Box domain);

    AnalyticKind kind() const noexcept { return kind_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    const Eigen::VectorXd& shifts() const noexcept { return shifts_; }

protected:
    Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const override;

private:
    AnalyticKind kind_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd shifts_;
};

}  // namespace sgbayes
