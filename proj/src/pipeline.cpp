#include "sgbayes/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace sgbayes {

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

// Model outputs at `points`, served from the cache where possible.
RowMatrix evaluate_points(const ForwardModel& model, const std::vector<MultiIndex>& points, const BuildPlan& plan,
                          const EvaluationCache* cache, std::size_t& evaluations, std::size_t& hits) {
    const auto nd = static_cast<Eigen::Index>(model.output_dim());
    RowMatrix block(static_cast<Eigen::Index>(points.size()), nd);
    std::vector<Eigen::VectorXd> thetas;
    std::vector<std::size_t> missing;
    thetas.reserve(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        thetas.push_back(point_coordinates(points[k], model.domain()));
        if (cache) {
            if (auto hit = cache->get(plan.model_id, points[k], thetas.back())) {
                if (hit->size() != nd)
                    throw CacheError("cache record for " + points[k].key() + " has the wrong output length");
                block.row(static_cast<Eigen::Index>(k)) = hit->transpose();
                ++hits;
                continue;
            }
        }
        missing.push_back(k);
    }

    std::vector<Eigen::VectorXd> todo;
    todo.reserve(missing.size());
    for (auto k : missing) todo.push_back(thetas[k]);
    evaluate_batch(model, todo, plan.jobs, [&](std::size_t m, const Eigen::VectorXd& value) {
        const std::size_t k = missing[m];
        block.row(static_cast<Eigen::Index>(k)) = value.transpose();
        ++evaluations;
        if (cache) cache->put(plan.model_id, points[k], thetas[k], value);
    });
    return block;
}

}  // namespace

void BuildPlan::validate(std::size_t dim) const {
    if (start_level < 0) throw ConfigurationError("surrogate.start_level must be non-negative");
    if (start_level > max_level) throw ConfigurationError("surrogate.start_level exceeds surrogate.max_level");
    if (!(alpha >= 0.0)) throw ConfigurationError("surrogate.alpha must be non-negative");
    if (jobs == 0) throw ConfigurationError("jobs must be positive");
    const auto initial = isotropic_grid(dim, start_level).size();
    if (budget < initial)
        throw ConfigurationError("surrogate.budget " + std::to_string(budget) + " is below the " +
                                 std::to_string(initial) + " points of the initial grid");
}

const char* to_string(Termination t) noexcept {
    switch (t) {
        case Termination::max_level: return "max-level";
        case Termination::tolerance: return "tolerance";
        case Termination::budget: return "budget";
    }
    return "unknown";
}

BuildResult build_surrogate(const ForwardModel& model, const BuildPlan& plan, const EvaluationCache* cache) {
    const auto start = clock_type::now();
    plan.validate(model.input_dim());
    if (cache && plan.model_id.empty()) throw ConfigurationError("a cached build needs a model id");

    BuildResult result{SurrogateModel(model.domain(), model.output_dim()), {}};
    SurrogateModel& s = result.surrogate;
    RunReport& report = result.report;
    s.metadata = {plan.model_id, plan.alpha, plan.mode, plan.start_level, plan.start_level};
    report.model_id = plan.model_id;
    report.seed = plan.seed;

    std::size_t evaluations = 0;
    auto record = [&](int level, std::size_t fresh, std::size_t evals, clock_type::time_point t0) {
        LevelRecord r;
        r.level = level;
        r.new_points = fresh;
        r.total_points = s.size();
        r.evaluations = evals;
        r.total_evaluations = evaluations;
        r.max_surplus = s.max_surplus_on_level(level, plan.mode);
        r.seconds = since(t0);
        report.levels.push_back(r);
    };

    // Initial isotropic grid, appended one total level at a time.
    {
        const auto t0 = clock_type::now();
        const auto grid = isotropic_grid(model.input_dim(), plan.start_level);
        std::vector<std::vector<MultiIndex>> by_level(static_cast<std::size_t>(plan.start_level) + 1);
        for (const auto& p : grid.points()) by_level[static_cast<std::size_t>(p.total_level())].push_back(p);
        std::size_t evals = 0;
        for (const auto& pts : by_level) {
            const std::size_t before = evaluations;
            const auto block = evaluate_points(model, pts, plan, cache, evaluations, report.cache_hits);
            evals += evaluations - before;
            s.append_level(pts, block);
        }
        record(plan.start_level, grid.size(), evals, t0);
    }

    int level = plan.start_level;
    report.termination = Termination::max_level;
    while (level < plan.max_level) {
        const auto t0 = clock_type::now();
        auto fresh = refine(s, plan.alpha, plan.mode);
        if (fresh.empty()) {
            report.termination = Termination::tolerance;
            break;
        }
        if (s.size() + fresh.size() > plan.budget) {
            report.termination = Termination::budget;
            break;
        }
        const std::size_t before = evaluations;
        const auto block = evaluate_points(model, fresh, plan, cache, evaluations, report.cache_hits);
        s.append_level(fresh, block);
        ++level;
        record(level, fresh.size(), evaluations - before, t0);
    }
    s.metadata.level_reached = level;
    report.seconds = since(start);
    return result;
}

SamplingResult summarize(Chain chain, const Box& range, std::size_t burn_in, std::size_t bins) {
    SamplingResult out;
    out.summary = diagnostics(chain, burn_in);
    const std::size_t d = chain.dim();
    for (std::size_t n = 0; n < d; ++n) {
        const auto i = static_cast<Eigen::Index>(n);
        out.marginals.push_back(marginal_histogram(chain, burn_in, n, bins, range.lower()[i], range.upper()[i]));
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b)
            out.joints.push_back({{a, b}, joint_histogram(chain, burn_in, a, b, bins, range)});
    out.chain = std::move(chain);
    return out;
}

SamplingResult run_calibration(std::shared_ptr<const SurrogateModel> surrogate, const PriorSpec& prior,
                               const LikelihoodSpec& likelihood, const DramConfig& dram, std::size_t bins) {
    if (!surrogate) throw NotFoundError("no surrogate to sample");
    const auto start = clock_type::now();
    const Posterior posterior(prior, likelihood, std::move(surrogate));
    Chain chain = sample([&](const Eigen::VectorXd& t) { return posterior.log_posterior(t); }, dram, prior.box);
    auto out = summarize(std::move(chain), prior.box, dram.burn_in, bins);
    out.seconds = since(start);
    return out;
}

SamplingResult run_direct_mcmc(std::shared_ptr<const ForwardModel> model, const PriorSpec& prior,
                               const LikelihoodSpec& likelihood, const DramConfig& dram, std::size_t bins,
                               bool force) {
    if (!model) throw ConfigurationError("direct sampling needs a model");
    if (model->spec().backend == Backend::external && !force)
        throw RefusalError("direct sampling would run the external model at every proposal; pass --force to allow it");
    const auto start = clock_type::now();
    const Posterior posterior(prior, likelihood, std::move(model));
    Chain chain = sample([&](const Eigen::VectorXd& t) { return posterior.log_posterior(t); }, dram, prior.box);
    auto out = summarize(std::move(chain), prior.box, dram.burn_in, bins);
    out.seconds = since(start);
    return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    // splitmix64 of the combined value
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string report_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["model_id"] = report.model_id;
    j["seed"] = report.seed;
    j["termination"] = to_string(report.termination);
    j["total_points"] = report.total_points();
    j["model_evaluations"] = report.total_evaluations();
    j["cache_hits"] = report.cache_hits;
    j["seconds"] = report.seconds;
    auto& levels = j["levels"] = nlohmann::ordered_json::array();
    for (const auto& r : report.levels)
        levels.push_back({{"level", r.level},
                          {"new_points", r.new_points},
                          {"total_points", r.total_points},
                          {"evaluations", r.evaluations},
                          {"total_evaluations", r.total_evaluations},
                          {"max_surplus", r.max_surplus},
                          {"seconds", r.seconds}});
    return j.dump(2) + "\n";
}

std::string summary_json(const ChainSummary& s) {
    nlohmann::ordered_json j;
    j["samples"] = s.samples;
    j["accept_stage1"] = s.accept_stage1;
    j["accept_stage2"] = s.accept_stage2;
    j["accept_total"] = s.accept_total;
    j["stage2_given_stage1_reject"] = s.stage2_conditional;
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j["mean"] = vec(s.mean);
    j["sd"] = vec(s.sd);
    j["ess"] = vec(s.ess);
    auto& ac = j["autocorrelation"] = nlohmann::ordered_json::array();
    for (Eigen::Index n = 0; n < s.autocorrelation.rows(); ++n) ac.push_back(vec(s.autocorrelation.row(n).transpose()));
    return j.dump(2) + "\n";
}

std::string report_table(const RunReport& report) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%6s %10s %10s %12s %12s %10s\n", "level", "new", "points", "model runs",
                  "max surplus", "seconds");
    out += buf;
    for (const auto& r : report.levels) {
        std::snprintf(buf, sizeof buf, "%6d %10zu %10zu %12zu %12.4e %10.3f\n", r.level, r.new_points,
                      r.total_points, r.total_evaluations, r.max_surplus, r.seconds);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "termination: %s; cache hits: %zu\n", to_string(report.termination),
                  report.cache_hits);
    out += buf;
    return out;
}

}  // namespace sgbayes
