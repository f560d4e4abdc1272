#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include <unistd.h>

#include "oracles.hpp"
#include "sgbayes/pipeline.hpp"
#include "sgbayes/external_model.hpp"
#include "sgbayes/synthetic_les.hpp"

using namespace sgbayes;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int serial = 0;
        path_ = fs::temp_directory_path() / ("sgbayes-pipeline-" + std::to_string(::getpid()) + "-" + std::to_string(serial++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

Box unit_box(std::size_t dim) { return Box(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)); }

// Wraps a model and throws on the call after `limit` successful ones.
class FailingModel final : public ForwardModel {
public:
    FailingModel(std::shared_ptr<const ForwardModel> inner, std::size_t limit)
        : ForwardModel(inner->spec()), inner_(std::move(inner)), limit_(limit) {}

protected:
    Eigen::VectorXd do_evaluate(const Eigen::VectorXd& theta) const override {
        if (calls_++ >= limit_) throw ModelExecutionError("simulated crash", "", "");
        return inner_->evaluate(theta);
    }

private:
    std::shared_ptr<const ForwardModel> inner_;
    std::size_t limit_;
    mutable std::atomic<std::size_t> calls_{0};
};

BuildPlan plan_for(int l0, int K, double alpha) {
    BuildPlan plan;
    plan.model_id = "test-model";
    plan.start_level = l0;
    plan.max_level = K;
    plan.alpha = alpha;
    return plan;
}

void expect_same_surrogate(const SurrogateModel& a, const SurrogateModel& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.grid().points()[k], b.grid().points()[k]);
    EXPECT_EQ(a.surpluses(), b.surpluses());
    EXPECT_EQ(a.values(), b.values());
}

}  // namespace

TEST(BuildPlan, Validation) {
    auto plan = plan_for(3, 2, 1e-3);
    EXPECT_THROW(plan.validate(2), ConfigurationError);
    plan = plan_for(-1, 2, 1e-3);
    EXPECT_THROW(plan.validate(2), ConfigurationError);
    plan = plan_for(1, 2, -1.0);
    EXPECT_THROW(plan.validate(2), ConfigurationError);
    plan = plan_for(2, 4, 1e-3);
    plan.budget = static_cast<std::size_t>(oracle::isotropic_count(3, 2)) - 1;
    EXPECT_THROW(plan.validate(3), ConfigurationError);
    plan.budget += 1;
    EXPECT_NO_THROW(plan.validate(3));
}

TEST(BuildSurrogate, InfiniteToleranceStopsAtStartLevel) {
    AnalyticModel model(AnalyticKind::gaussian_peak, unit_box(2));
    const auto result = build_surrogate(model, plan_for(3, 8, std::numeric_limits<double>::infinity()));
    EXPECT_EQ(result.report.termination, Termination::tolerance);
    EXPECT_EQ(result.surrogate.metadata.level_reached, 3);
    EXPECT_EQ(result.surrogate.size(), static_cast<std::size_t>(oracle::isotropic_count(2, 3)));
    ASSERT_EQ(result.report.levels.size(), 1u);
    EXPECT_EQ(result.report.total_evaluations(), result.surrogate.size());
}

TEST(BuildSurrogate, StartEqualToMaxLevelIsIsotropic) {
    AnalyticModel model(AnalyticKind::oscillatory, unit_box(3));
    const auto result = build_surrogate(model, plan_for(4, 4, 0.0));
    EXPECT_EQ(result.report.termination, Termination::max_level);
    EXPECT_EQ(result.surrogate.size(), static_cast<std::size_t>(oracle::isotropic_count(3, 4)));
}

TEST(BuildSurrogate, MatchesDirectSurplusComputation) {
    AnalyticModel model(AnalyticKind::product_peak, unit_box(2));
    const auto built = build_surrogate(model, plan_for(5, 5, 0.0)).surrogate;
    const auto grid = isotropic_grid(2, 5);
    PointValues values;
    for (const auto& p : grid.points()) values.emplace(p, model.evaluate(point_coordinates(p, model.domain())));
    const auto direct = compute_surpluses(grid, values, model.domain());
    for (double x = 0.0; x <= 1.0; x += 0.0625)
        for (double y = 0.0; y <= 1.0; y += 0.0625) {
            const Eigen::Vector2d t(x, y);
            EXPECT_NEAR(built.eval(t)[0], direct.eval(t)[0], 1e-13);
        }
}

TEST(BuildSurrogate, MultilinearTerminatesByTolerance) {
    for (std::size_t dim : {1u, 2u, 3u}) {
        AnalyticModel model(AnalyticKind::multilinear, unit_box(dim));
        const auto result = build_surrogate(model, plan_for(1, 12, 1e-12));
        EXPECT_EQ(result.report.termination, Termination::tolerance) << dim;
        EXPECT_LE(result.surrogate.metadata.level_reached, static_cast<int>(dim) + 1) << dim;
        std::mt19937_64 rng(dim);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int t = 0; t < 200; ++t) {
            Eigen::VectorXd theta(static_cast<Eigen::Index>(dim));
            for (auto& v : theta) v = U(rng);
            EXPECT_NEAR(result.surrogate.eval(theta)[0], model.evaluate(theta)[0], 1e-12);
        }
    }
}

TEST(BuildSurrogate, BudgetStopsBeforeExceeding) {
    AnalyticModel model(AnalyticKind::gaussian_peak, unit_box(2), Eigen::Vector2d(20.0, 20.0), Eigen::Vector2d(0.3, 0.6));
    auto plan = plan_for(2, 12, 0.0);
    plan.budget = 60;
    const auto result = build_surrogate(model, plan);
    EXPECT_EQ(result.report.termination, Termination::budget);
    EXPECT_LE(result.surrogate.size(), plan.budget);
    EXPECT_LE(result.report.total_evaluations(), plan.budget);
    // the refused next level would have exceeded the budget
    EXPECT_GT(result.surrogate.size() + refine(result.surrogate, plan.alpha).size(), plan.budget);
}

TEST(BuildSurrogate, LevelRecordsAreConsistent) {
    SyntheticLesModel model;
    const auto result = build_surrogate(model, plan_for(2, 5, 1e-2));
    std::size_t total = 0;
    int level = 1;
    for (const auto& r : result.report.levels) {
        EXPECT_EQ(r.level, level + 1);
        level = r.level;
        total += r.new_points;
        EXPECT_EQ(r.total_points, total);
        EXPECT_EQ(r.evaluations, r.new_points);
        EXPECT_GE(r.max_surplus, 0.0);
    }
    EXPECT_EQ(total, result.surrogate.size());
    EXPECT_EQ(result.surrogate.metadata.level_reached, level);
    EXPECT_EQ(result.surrogate.metadata.start_level, 2);
}

TEST(BuildSurrogate, ParallelBuildEqualsSerial) {
    SyntheticLesModel model;
    auto plan = plan_for(2, 5, 1e-2);
    const auto serial = build_surrogate(model, plan).surrogate;
    plan.jobs = 4;
    const auto parallel = build_surrogate(model, plan).surrogate;
    expect_same_surrogate(serial, parallel);
}

TEST(BuildSurrogate, ResumeAfterCrashReusesCachedRuns) {
    TempDir dir;
    const EvaluationCache cache(dir.path() / "cache");
    auto inner = std::make_shared<SyntheticLesModel>();
    const auto plan = plan_for(2, 5, 1e-2);
    const auto reference = build_surrogate(*inner, plan);
    const std::size_t total = reference.report.total_evaluations();

    const std::size_t survived = total / 2;
    FailingModel crashing(inner, survived);
    EXPECT_THROW(build_surrogate(crashing, plan, &cache), ModelExecutionError);
    EXPECT_EQ(cache.count(plan.model_id), survived);

    CountingModel counting(inner);
    const auto resumed = build_surrogate(counting, plan, &cache);
    EXPECT_EQ(counting.count(), total - survived);
    EXPECT_EQ(resumed.report.total_evaluations(), total - survived);
    EXPECT_EQ(resumed.report.cache_hits, survived);
    expect_same_surrogate(reference.surrogate, resumed.surrogate);

    counting.reset();
    const auto again = build_surrogate(counting, plan, &cache);
    EXPECT_EQ(counting.count(), 0u);
    EXPECT_EQ(again.report.cache_hits, total);
    expect_same_surrogate(reference.surrogate, again.surrogate);
}

TEST(BuildSurrogate, FidelityDoesNotDegradeWithTighterTolerance) {
    AnalyticModel model(AnalyticKind::gaussian_peak, unit_box(3), Eigen::Vector3d(6.0, 4.0, 2.0),
                        Eigen::Vector3d(0.4, 0.55, 0.5));
    auto max_error = [&](const SurrogateModel& s) {
        double e = 0.0;
        for (int a = 0; a <= 10; ++a)
            for (int b = 0; b <= 10; ++b)
                for (int c = 0; c <= 10; ++c) {
                    const Eigen::Vector3d t(a / 10.0, b / 10.0, c / 10.0);
                    e = std::max(e, std::abs(s.eval(t)[0] - model.evaluate(t)[0]));
                }
        return e;
    };
    double previous = std::numeric_limits<double>::infinity();
    std::set<std::string> previous_points;
    for (double alpha : {1e-1, 1e-2, 1e-3}) {
        const auto s = build_surrogate(model, plan_for(2, 7, alpha)).surrogate;
        std::set<std::string> points;
        for (const auto& p : s.grid().points()) points.insert(p.key());
        for (const auto& k : previous_points) EXPECT_TRUE(points.count(k)) << alpha << " lost " << k;
        const double e = max_error(s);
        EXPECT_LE(e, previous * 1.05) << alpha;
        previous = e;
        previous_points = std::move(points);
    }
}

TEST(Calibration, NeverCallsTheForwardModel) {
    auto model = std::make_shared<CountingModel>(std::make_shared<SyntheticLesModel>());
    const auto built = build_surrogate(*model, plan_for(3, 4, 1e-2));
    const std::size_t after_build = model->count();
    EXPECT_EQ(after_build, built.surrogate.size());

    SyntheticLesConfig cfg;
    const auto data = make_reference_data(*model, cfg.true_theta, 0.1, 7);
    model->reset();
    DramConfig dram;
    dram.samples = 4000;
    dram.burn_in = 1000;
    const auto result = run_calibration(std::make_shared<SurrogateModel>(built.surrogate), PriorSpec{model->domain()},
                                        LikelihoodSpec::mvn(data, 0.1), dram, 20);
    EXPECT_EQ(model->count(), 0u);
    EXPECT_EQ(result.chain.size(), dram.samples);
    EXPECT_EQ(result.marginals.size(), 3u);
    EXPECT_EQ(result.joints.size(), 3u);
    for (const auto& h : result.marginals) EXPECT_NEAR(h.density.sum() * h.width(), 1.0, 1e-12);
}

TEST(DirectMcmc, EvaluationCountMatchesProposals) {
    // Wide box so no proposal leaves it: one run for the start, one per
    // stage-1 proposal and one per stage-2 proposal.
    const Box box(Eigen::VectorXd::Constant(2, -100.0), Eigen::VectorXd::Constant(2, 100.0));
    auto peak = std::make_shared<AnalyticModel>(AnalyticKind::gaussian_peak, box, Eigen::Vector2d(1e-2, 1e-2),
                                                Eigen::Vector2d(0.0, 0.0));
    auto model = std::make_shared<CountingModel>(peak);
    DramConfig dram;
    dram.samples = 3000;
    dram.burn_in = 500;
    const Eigen::VectorXd data = Eigen::VectorXd::Ones(1);
    const auto result = run_direct_mcmc(model, PriorSpec{box}, LikelihoodSpec::mvn(data, 0.05), dram, 30);
    std::size_t accepted1 = 0;
    for (auto s : result.chain.stages) accepted1 += s == Stage::stage1_accept;
    EXPECT_EQ(model->count(), 1 + dram.samples + (dram.samples - accepted1));
}

TEST(DirectMcmc, FindsTheAnalyticPeak) {
    const Box box = unit_box(2);
    auto model = std::make_shared<AnalyticModel>(AnalyticKind::gaussian_peak, box, Eigen::Vector2d(30.0, 30.0),
                                                 Eigen::Vector2d(0.3, 0.7));
    DramConfig dram;
    dram.samples = 20000;
    dram.burn_in = 2000;
    const Eigen::VectorXd data = Eigen::VectorXd::Ones(1);
    const auto result = run_direct_mcmc(model, PriorSpec{box}, LikelihoodSpec::mvn(data, 0.05), dram, 50);
    EXPECT_NEAR(result.marginals[0].mode(), 0.3, 0.05);
    EXPECT_NEAR(result.marginals[1].mode(), 0.7, 0.05);
}

TEST(DirectMcmc, RefusesExternalModelUnlessForced) {
    ExternalModelConfig cfg;
    cfg.executable = "/bin/false";
    cfg.domain = unit_box(1);
    cfg.output_dim = 1;
    auto model = std::make_shared<ExternalModel>(cfg);
    DramConfig dram;
    dram.samples = 10;
    dram.burn_in = 1;
    const Eigen::VectorXd data = Eigen::VectorXd::Ones(1);
    EXPECT_THROW(run_direct_mcmc(model, PriorSpec{cfg.domain}, LikelihoodSpec::mvn(data, 0.1), dram), RefusalError);
    EXPECT_EQ(model->launches(), 0u);
    EXPECT_THROW(run_direct_mcmc(model, PriorSpec{cfg.domain}, LikelihoodSpec::mvn(data, 0.1), dram, 50, true),
                 ModelExecutionError);
}

TEST(DeriveSeed, DistinctAndDeterministic) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 10; ++m)
        for (std::uint64_t s = 0; s < 10; ++s) seen.insert(derive_seed(m, s));
    EXPECT_EQ(seen.size(), 100u);
    EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(Report, JsonCarriesTotals) {
    AnalyticModel model(AnalyticKind::gaussian_peak, unit_box(2));
    const auto result = build_surrogate(model, plan_for(2, 4, 1e-3));
    const auto text = report_json(result.report);
    EXPECT_NE(text.find("\"termination\""), std::string::npos);
    EXPECT_NE(text.find("\"total_points\": " + std::to_string(result.surrogate.size())), std::string::npos);
    const auto table = report_table(result.report);
    EXPECT_NE(table.find("termination: "), std::string::npos);
}
