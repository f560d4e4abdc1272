#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sgbayes/bayes.hpp"
#include "sgbayes/forward_model.hpp"
#include "sgbayes/mcmc.hpp"
#include "sgbayes/persistence.hpp"
#include "sgbayes/surrogate.hpp"

namespace sgbayes {

struct BuildPlan {
    std::string model_id;
    int start_level = 5;
    int max_level = 8;
    double alpha = 1e-3;
    RefinementMode mode = RefinementMode::relative;
    /// Cap on grid points, i.e. on the model runs an uncached build performs.
    std::size_t budget = std::numeric_limits<std::size_t>::max();
    std::size_t jobs = 1;
    std::uint64_t seed = 0;

    /// Throws ConfigurationError unless 0 <= ℓ₀ <= K, α >= 0 and the budget
    /// covers the initial isotropic grid in `dim` dimensions.
    void validate(std::size_t dim) const;
};

enum class Termination { max_level, tolerance, budget };

const char* to_string(Termination t) noexcept;

struct LevelRecord {
    int level = 0;
    std::size_t new_points = 0;
    std::size_t total_points = 0;
    /// Model runs (cache misses) for this level and so far.
    std::size_t evaluations = 0;
    std::size_t total_evaluations = 0;
    double max_surplus = 0.0;
    double seconds = 0.0;
};

struct RunReport {
    std::string model_id;
    std::vector<LevelRecord> levels;
    std::size_t cache_hits = 0;
    Termination termination = Termination::max_level;
    std::uint64_t seed = 0;
    double seconds = 0.0;

    std::size_t total_points() const noexcept { return levels.empty() ? 0 : levels.back().total_points; }
    std::size_t total_evaluations() const noexcept { return levels.empty() ? 0 : levels.back().total_evaluations; }
};

struct BuildResult {
    SurrogateModel surrogate;
    RunReport report;
};

/// Adaptive build: isotropic grid of level ℓ₀, then refine level by level
/// until K, the tolerance or the budget stops it. With a cache, points
/// already stored are never re-evaluated and every finished model run is
/// stored at once, so an aborted build can be resumed.
BuildResult build_surrogate(const ForwardModel& model, const BuildPlan& plan, const EvaluationCache* cache = nullptr);

struct SamplingResult {
    Chain chain;
    ChainSummary summary;
    std::vector<Histogram> marginals;
    /// Joint histograms for every pair (i < j).
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, JointHistogram>> joints;
    double seconds = 0.0;
};

/// Marginal and pairwise histograms over the prior box plus diagnostics.
SamplingResult summarize(Chain chain, const Box& range, std::size_t burn_in, std::size_t bins);

/// DRAM on the surrogate posterior. The forward model is not involved.
SamplingResult run_calibration(std::shared_ptr<const SurrogateModel> surrogate, const PriorSpec& prior,
                               const LikelihoodSpec& likelihood, const DramConfig& dram, std::size_t bins = 50);

/// Conventional DRAM calling the true model at every proposal. Refuses an
/// external-process model unless `force` is set.
SamplingResult run_direct_mcmc(std::shared_ptr<const ForwardModel> model, const PriorSpec& prior,
                               const LikelihoodSpec& likelihood, const DramConfig& dram, std::size_t bins = 50,
                               bool force = false);

/// Independent stream seed derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

std::string report_json(const RunReport& report);
std::string summary_json(const ChainSummary& summary);

/// Fixed-width per-level table for terminal output.
std::string report_table(const RunReport& report);

}  // namespace sgbayes
