#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sgbayes/grid_core.hpp"
#include "sgbayes/surrogate.hpp"

namespace sgbayes {

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

inline constexpr std::size_t never = std::numeric_limits<std::size_t>::max();

struct DramConfig {
    std::size_t samples = 60000;
    std::size_t burn_in = 10000;
    /// Starting point; empty means the centre of the box.
    Eigen::VectorXd initial;
    /// Initial proposal covariance; empty means diag((0.1 · range_n)²).
    Eigen::MatrixXd initial_cov;
    /// First iteration at which the proposal adapts; `never` freezes it.
    std::size_t adapt_start = 1000;
    std::size_t adapt_interval = 100;
    /// Adaptive scale; 0 means 2.4² / N_θ.
    double scale = 0.0;
    double regularizer = 1e-10;
    /// 1 gives plain Metropolis, 2 adds one delayed-rejection stage.
    int stages = 2;
    double gamma = 5.0;
    std::uint64_t seed = 1;

    /// Throws ConfigurationError on inconsistent settings.
    void validate() const;
};

enum class Stage : std::uint8_t { stage1_accept, stage2_accept, reject };

const char* to_string(Stage stage) noexcept;
Stage stage_from_string(const std::string& text);

/// Every iterate, rejections included as repeats of the previous row.
struct Chain {
    RowMatrix draws;
    Eigen::VectorXd log_post;
    std::vector<Stage> stages;

    std::size_t size() const noexcept { return stages.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(draws.cols()); }

    bool operator==(const Chain&) const = default;
};

/// DRAM sampler. Proposals outside `box` (when given) are rejected without
/// evaluating the target; the box also supplies the default start point
/// and proposal covariance.
Chain sample(const LogDensity& target, const DramConfig& config, const std::optional<Box>& box);

struct ChainSummary {
    std::size_t samples = 0;
    /// Fraction of iterations accepted at stage 1, at stage 2, and overall.
    double accept_stage1 = 0.0;
    double accept_stage2 = 0.0;
    double accept_total = 0.0;
    /// Stage-2 acceptances over stage-1 rejections.
    double stage2_conditional = 0.0;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    /// Row n holds lags 0..max_lag of dimension n.
    Eigen::MatrixXd autocorrelation;
    Eigen::VectorXd ess;
};

/// Summary statistics of the iterations after `burn_in`. A dimension that
/// never moves has autocorrelation 1 at every lag and ESS 1.
ChainSummary diagnostics(const Chain& chain, std::size_t burn_in, std::size_t max_lag = 100);

/// Normalized autocorrelation at lags 0..max_lag.
Eigen::VectorXd autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t max_lag);

/// Effective sample size with Geyer's initial monotone sequence estimator.
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x);

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    Eigen::VectorXd density;

    std::size_t bins() const noexcept { return static_cast<std::size_t>(density.size()); }
    double width() const noexcept { return (hi - lo) / static_cast<double>(density.size()); }
    double left(std::size_t b) const noexcept { return lo + width() * static_cast<double>(b); }
    double right(std::size_t b) const noexcept { return b + 1 == bins() ? hi : left(b + 1); }
    /// Centre of the fullest bin.
    double mode() const;
};

/// Density histogram over [lo, hi]; values outside the range are dropped
/// from the counts but not from the normalization.
Histogram histogram(const Eigen::Ref<const Eigen::VectorXd>& samples, std::size_t bins, double lo, double hi);

Histogram marginal_histogram(const Chain& chain, std::size_t burn_in, std::size_t dim, std::size_t bins, double lo,
                             double hi);

struct JointHistogram {
    double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
    /// density(bx, by)
    Eigen::MatrixXd density;
};

JointHistogram joint_histogram(const Chain& chain, std::size_t burn_in, std::size_t dim_x, std::size_t dim_y,
                               std::size_t bins, const Box& range);

/// ½ Σ |p_b - q_b| w over histograms sharing the same bins.
double total_variation(const Histogram& p, const Histogram& q);

}  // namespace sgbayes
