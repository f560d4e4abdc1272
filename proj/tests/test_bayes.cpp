#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <unistd.h>

#include "sgbayes/bayes.hpp"
#include "sgbayes/synthetic_les.hpp"

using namespace sgbayes;

namespace {

constexpr double ninf = -std::numeric_limits<double>::infinity();

std::shared_ptr<const SurrogateModel> surrogate_of(const ForwardModel& model, int K) {
    const auto grid = isotropic_grid(model.input_dim(), K);
    PointValues values;
    for (const auto& p : grid.points()) values.emplace(p, model.evaluate(point_coordinates(p, model.domain())));
    return std::make_shared<SurrogateModel>(compute_surpluses(grid, values, model.domain()));
}

}  // namespace

TEST(LogLikelihoodMvn, HandExamples) {
    const Eigen::Vector2d d(1.0, 2.0);
    EXPECT_EQ(log_likelihood_mvn(d, d, Eigen::Vector2d(0.3, 0.7)), 0.0);
    EXPECT_NEAR(log_likelihood_mvn(Eigen::VectorXd::Constant(1, 2.5), Eigen::VectorXd::Constant(1, 2.0),
                                   Eigen::VectorXd::Constant(1, 0.5)),
                -0.5, 1e-12);
    EXPECT_NEAR(log_likelihood_mvn(d, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()), -2.5, 1e-12);
}

TEST(LogLikelihoodMvn, Errors) {
    EXPECT_THROW(log_likelihood_mvn(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)),
                 ConfigurationError);
    EXPECT_THROW(log_likelihood_mvn(Eigen::VectorXd(Eigen::Vector2d(1, 2)), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(2)),
                 ConfigurationError);
}

TEST(LogLikelihoodMvn, MaximizedOnlyAtData) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXd d(20), s = Eigen::VectorXd::Constant(20, 0.2);
    for (auto& v : d) v = N(rng);
    EXPECT_EQ(log_likelihood_mvn(d, d, s), 0.0);
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd f = d;
        f[static_cast<Eigen::Index>(t % 20)] += 1e-6 * (1 + N(rng) * N(rng));
        EXPECT_LT(log_likelihood_mvn(d, f, s), 0.0);
    }
}

TEST(LogLikelihoodExp, HandExamples) {
    const Eigen::Vector2d d(0.0, 2.0);
    EXPECT_EQ(log_likelihood_exp(d, d, 500.0), 0.0);
    EXPECT_NEAR(log_likelihood_exp(d, Eigen::Vector2d::Zero(), 500.0), -500.0, 1e-12);
    EXPECT_NEAR(log_likelihood_exp(d, d + Eigen::Vector2d::Constant(3.7), 500.0), 0.0, 1e-12);
}

TEST(LogLikelihoodExp, ConstantDataIsConfigurationError) {
    EXPECT_THROW(log_likelihood_exp(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(0, 1, 2), 500.0), ConfigurationError);
    EXPECT_THROW(log_likelihood_exp(Eigen::Vector3d(1, 2, 1), Eigen::Vector3d(0, 1, 2), 0.0), ConfigurationError);
}

TEST(LogLikelihoodExp, MeanShiftInvariance) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> C(-100.0, 100.0);
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd d(55), f(55);
        for (Eigen::Index k = 0; k < 55; ++k) {
            d[k] = N(rng);
            f[k] = d[k] + 0.3 * N(rng);
        }
        const double base = log_likelihood_exp(d, f, 500.0);
        const double shifted = log_likelihood_exp(d, (f.array() + C(rng)).matrix(), 500.0);
        EXPECT_NEAR(shifted, base, 1e-9 * std::abs(base));
    }
}

TEST(LogLikelihoodExp, StrictlyDecreasingInZeta) {
    const Eigen::Vector3d d(0.0, 1.0, 3.0), f(0.5, 1.0, 2.0);
    double prev = log_likelihood_exp(d, f, 1.0);
    for (double z : {2.0, 10.0, 500.0, 1e4}) {
        const double v = log_likelihood_exp(d, f, z);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Prior, UniformBox) {
    PriorSpec prior{Box(Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 4))};
    EXPECT_NEAR(prior.log_density(Eigen::Vector2d(1, 1)), -std::log(8.0), 1e-15);
    EXPECT_EQ(prior.log_density(Eigen::Vector2d(1, 1)), prior.log_density(Eigen::Vector2d(0, 4)));
    EXPECT_EQ(prior.log_density(Eigen::Vector2d(2.1, 1)), ninf);
}

TEST(Posterior, OutsideBoxIsMinusInfinity) {
    auto model = std::make_shared<SyntheticLesModel>();
    const auto d = model->evaluate(model->config().true_theta);
    Posterior post(PriorSpec{model->domain()}, LikelihoodSpec::mvn(d, 0.1), model);
    EXPECT_EQ(post.log_posterior(Eigen::Vector3d(0.25, 0.5, 0.01)), ninf);
    EXPECT_EQ(post.log_posterior(Eigen::Vector3d(0.1, -0.1, 0.01)), ninf);
    EXPECT_EQ(post.log_posterior(Eigen::Vector3d(0.1, 0.5, 1.0)), ninf);
    EXPECT_NEAR(post.log_posterior(model->config().true_theta), -std::log(model->domain().width().prod()), 1e-12);
}

TEST(Posterior, SurrogateMatchesTrueModelAtGridPoints) {
    auto model = std::make_shared<SyntheticLesModel>();
    const auto d = make_reference_data(*model, model->config().true_theta, 0.1, 17);
    auto surrogate = surrogate_of(*model, 4);
    for (auto spec : {LikelihoodSpec::mvn(d, 0.1), LikelihoodSpec::exp(d, 500.0)}) {
        Posterior truth(PriorSpec{model->domain()}, spec, model);
        Posterior approx(PriorSpec{model->domain()}, spec, surrogate);
        EXPECT_TRUE(approx.uses_surrogate());
        for (const auto& p : surrogate->grid().points()) {
            const auto theta = point_coordinates(p, model->domain());
            EXPECT_NEAR(approx.log_posterior(theta), truth.log_posterior(theta), 1e-10) << p.key();
        }
    }
}

TEST(Posterior, ArgmaxInvariantUnderPriorRescaling) {
    auto model = std::make_shared<SyntheticLesModel>();
    const auto d = model->evaluate(model->config().true_theta);
    const Box& box = model->domain();
    const Box narrow(box.lower(), box.lower() + 0.5 * box.width());
    Posterior wide_post(PriorSpec{box}, LikelihoodSpec::mvn(d, 0.1), model);
    Posterior narrow_post(PriorSpec{narrow}, LikelihoodSpec::mvn(d, 0.1), model);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double best_w = ninf, best_n = ninf;
    Eigen::VectorXd arg_w, arg_n;
    for (int t = 0; t < 500; ++t) {
        const Eigen::VectorXd theta = narrow.to_physical(Eigen::Vector3d(U(rng), U(rng), U(rng)));
        const double w = wide_post.log_posterior(theta), n = narrow_post.log_posterior(theta);
        EXPECT_NEAR(w - n, -std::log(8.0), 1e-9);
        if (w > best_w) best_w = w, arg_w = theta;
        if (n > best_n) best_n = n, arg_n = theta;
    }
    EXPECT_EQ(arg_w, arg_n);
}

TEST(Posterior, RejectsMismatchedConfiguration) {
    auto model = std::make_shared<SyntheticLesModel>();
    EXPECT_THROW(Posterior(PriorSpec{model->domain()}, LikelihoodSpec::mvn(Eigen::VectorXd::Ones(54), 0.1), model),
                 ConfigurationError);
    const Box bigger(model->domain().lower(), model->domain().upper() * 2.0);
    const auto d = model->evaluate(model->config().true_theta);
    EXPECT_THROW(Posterior(PriorSpec{bigger}, LikelihoodSpec::mvn(d, 0.1), model), ConfigurationError);
    EXPECT_THROW(LikelihoodSpec::mvn(d, 0.0), ConfigurationError);
    EXPECT_THROW(LikelihoodSpec::exp(Eigen::VectorXd::Ones(55), 500.0), ConfigurationError);
}

TEST(ReferenceData, NoiseFreeIsExact) {
    SyntheticLesModel model;
    const auto& t = model.config().true_theta;
    EXPECT_EQ(make_reference_data(model, t, 0.0, 1), model.evaluate(t));
}

TEST(ReferenceData, SeededAndCalibrated) {
    SyntheticLesModel model;
    const auto& t = model.config().true_theta;
    const auto a = make_reference_data(model, t, 0.1, 42);
    EXPECT_EQ(a, make_reference_data(model, t, 0.1, 42));
    EXPECT_NE(a, make_reference_data(model, t, 0.1, 43));
    const Eigen::ArrayXd e = (a - model.evaluate(t)).array();
    const double sd = std::sqrt((e - e.mean()).square().sum() / (e.size() - 1));
    EXPECT_NEAR(sd, 0.1, 0.03);
}

TEST(ReferenceData, CsvRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / ("sgbayes-ref-" + std::to_string(::getpid()) + ".csv");
    SyntheticLesModel model;
    const auto d = make_reference_data(model, model.config().true_theta, 0.1, 9);
    write_reference_data(path, d);
    EXPECT_EQ(read_reference_data(path), d);
    std::filesystem::remove(path);
    EXPECT_THROW(read_reference_data(path), NotFoundError);
}
