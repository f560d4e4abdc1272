#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sgbayes/sparse_grid.hpp"
#include "sgbayes/surrogate.hpp"

using namespace sgbayes;

namespace {

using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Fn scalar(std::function<double(const Eigen::VectorXd&)> f) {
    return [f](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, f(x)); };
}

SurrogateModel fit(const SparseGrid& grid, const Fn& f, const Box& box) {
    PointValues values;
    for (const auto& p : grid.points()) values.emplace(p, f(point_coordinates(p, box)));
    return compute_surpluses(grid, values, box);
}

// Direct sum over every stored node, using the checked basis function.
Eigen::VectorXd brute_force_eval(const SurrogateModel& s, const Eigen::VectorXd& unit) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.output_dim()));
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto& p = s.grid()[k];
        double w = 1.0;
        for (std::size_t n = 0; n < p.dim(); ++n) w *= basis_eval(p.level[n], p.index[n], unit[static_cast<Eigen::Index>(n)]);
        out += w * s.surpluses().row(static_cast<Eigen::Index>(k)).transpose();
    }
    return out;
}

// Test-local adaptive loop (the production one lives in the pipeline).
SurrogateModel adaptive_fit(std::size_t dim, int start, int max_level, double alpha, const Fn& f,
                            RefinementMode mode = RefinementMode::relative) {
    const Box box = Box::unit(dim);
    SurrogateModel s = fit(isotropic_grid(dim, start), f, box);
    for (int level = start; level < max_level; ++level) {
        auto fresh = refine(s, alpha, mode);
        if (fresh.empty()) break;
        RowMatrix block(static_cast<Eigen::Index>(fresh.size()), static_cast<Eigen::Index>(s.output_dim()));
        for (std::size_t k = 0; k < fresh.size(); ++k)
            block.row(static_cast<Eigen::Index>(k)) = f(point_coordinates(fresh[k], box)).transpose();
        s.append_level(fresh, block);
    }
    return s;
}

std::set<MultiIndex> point_set(const SparseGrid& g) { return {g.points().begin(), g.points().end()}; }

}  // namespace

TEST(IsotropicGrid, CountsMatchBruteForceEnumeration) {
    for (int dim = 1; dim <= 3; ++dim)
        for (int K = 0; K <= 5; ++K)
            EXPECT_EQ(static_cast<std::int64_t>(isotropic_grid(static_cast<std::size_t>(dim), K).size()),
                      oracle::isotropic_count(dim, K))
                << "dim=" << dim << " K=" << K;
}

TEST(IsotropicGrid, SpotCounts) {
    EXPECT_EQ(isotropic_grid(3, 0).size(), 1u);
    EXPECT_EQ(isotropic_grid(3, 1).size(), 7u);
    EXPECT_EQ(isotropic_grid(2, 2).size(), 13u);
    // The 177-run starting grid of the LES calibration study is |i| <= 4 in
    // three dimensions; its adaptive successors stay below these counts.
    EXPECT_EQ(isotropic_grid(3, 4).size(), 177u);
    EXPECT_GT(isotropic_grid(3, 5).size(), 439u);
    EXPECT_GT(isotropic_grid(3, 6).size(), 1002u);
    EXPECT_GT(isotropic_grid(3, 7).size(), 2190u);
}

TEST(IsotropicGrid, NodesAreDistinctValidAndOrderedByLevel) {
    auto g = isotropic_grid(3, 5);
    std::set<std::vector<double>> coords;
    int last_level = 0;
    for (const auto& p : g.points()) {
        EXPECT_TRUE(p.is_valid());
        EXPECT_LE(p.total_level(), 5);
        EXPECT_GE(p.total_level(), last_level);
        last_level = p.total_level();
        auto x = unit_coordinates(p);
        EXPECT_TRUE(coords.insert({x.data(), x.data() + x.size()}).second);
    }
    EXPECT_EQ(g.max_level(), 5);
}

TEST(ComputeSurpluses, ConstantFunction) {
    auto s = fit(isotropic_grid(2, 3), scalar([](const Eigen::VectorXd&) { return 5.0; }), Box::unit(2));
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double expected = s.grid()[k].total_level() == 0 ? 5.0 : 0.0;
        EXPECT_EQ(s.surpluses()(static_cast<Eigen::Index>(k), 0), expected);
    }
    for (double a : {0.0, 0.3, 0.77, 1.0})
        for (double b : {0.0, 0.5, 0.91}) EXPECT_EQ(s.eval(Eigen::Vector2d(a, b))[0], 5.0);
}

TEST(ComputeSurpluses, IdentityInOneDimension) {
    auto s = fit(isotropic_grid(1, 2), scalar([](const Eigen::VectorXd& x) { return x[0]; }), Box::unit(1));
    auto c = [&](int i, int j) { return s.surpluses()(static_cast<Eigen::Index>(*s.grid().find(MultiIndex({i}, {j}))), 0); };
    EXPECT_EQ(c(0, 1), 0.5);
    EXPECT_EQ(c(1, 1), -0.5);
    EXPECT_EQ(c(1, 2), 0.5);
    EXPECT_EQ(c(2, 1), 0.0);
    EXPECT_EQ(c(2, 2), 0.0);
}

TEST(ComputeSurpluses, SquareInOneDimension) {
    auto s = fit(isotropic_grid(1, 2), scalar([](const Eigen::VectorXd& x) { return x[0] * x[0]; }), Box::unit(1));
    const auto k = *s.grid().find(MultiIndex({2}, {1}));
    EXPECT_DOUBLE_EQ(s.surpluses()(static_cast<Eigen::Index>(k), 0), -0.0625);
}

TEST(ComputeSurpluses, MatchesNodalDifferenceOracleInOneDimension) {
    const std::function<double(double)> f = [](double x) { return std::sin(3.0 * x) + x * x * x; };
    auto s = fit(isotropic_grid(1, 7), scalar([&](const Eigen::VectorXd& x) { return f(x[0]); }), Box::unit(1));
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto& p = s.grid()[k];
        const double x = unit_coordinates(p)[0];
        EXPECT_NEAR(s.surpluses()(static_cast<Eigen::Index>(k), 0), oracle::surplus_1d(f, p.level[0], x), 1e-14)
            << p.key();
    }
}

TEST(ComputeSurpluses, MissingValueIsIncompleteData) {
    auto g = isotropic_grid(2, 2);
    PointValues values;
    for (const auto& p : g.points()) values.emplace(p, Eigen::VectorXd::Ones(1));
    values.erase(g[5]);
    EXPECT_THROW(compute_surpluses(g, values, Box::unit(2)), IncompleteDataError);
}

TEST(Eval, LinearFunctionIsExactFromLevelOne) {
    auto f = scalar([](const Eigen::VectorXd& x) { return x[0]; });
    for (int K = 1; K <= 3; ++K) {
        auto s = fit(isotropic_grid(2, K), f, Box::unit(2));
        for (int a = 0; a <= 16; ++a)
            for (int b = 0; b <= 16; ++b) {
                Eigen::Vector2d x(a / 16.0, b / 16.0);
                EXPECT_NEAR(s.eval(x)[0], x[0], 1e-15);
            }
    }
}

TEST(Eval, BilinearProductExactAtLevelTwoOnlyNodalAtLevelOne) {
    auto f = scalar([](const Eigen::VectorXd& x) { return x[0] * x[1]; });
    auto s2 = fit(isotropic_grid(2, 2), f, Box::unit(2));
    auto s1 = fit(isotropic_grid(2, 1), f, Box::unit(2));
    double worst1 = 0.0;
    for (int a = 0; a <= 16; ++a)
        for (int b = 0; b <= 16; ++b) {
            Eigen::Vector2d x(a / 16.0, b / 16.0);
            EXPECT_NEAR(s2.eval(x)[0], x[0] * x[1], 1e-15);
            worst1 = std::max(worst1, std::abs(s1.eval(x)[0] - x[0] * x[1]));
        }
    EXPECT_GT(worst1, 0.1);
    for (const auto& p : s1.grid().points()) {
        auto x = unit_coordinates(p);
        EXPECT_NEAR(s1.eval(x)[0], x[0] * x[1], 1e-15);
    }
}

TEST(Eval, PrunedEvaluationEqualsDirectSum) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto f = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd out(2);
        out << std::exp(-4.0 * (x.array() - 0.3).square().sum()), std::cos(2.0 * x.sum());
        return out;
    };
    auto s = adaptive_fit(3, 2, 6, 1e-2, f);
    for (int t = 0; t < 200; ++t) {
        Eigen::Vector3d x(u(rng), u(rng), u(rng));
        if (t % 5 == 0) x[t % 3] = (t % 2) ? 1.0 : 0.5;
        EXPECT_LT((s.eval(x) - brute_force_eval(s, x)).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Eval, OutsideDomainIsDomainError) {
    Box box(Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 2));
    auto s = fit(isotropic_grid(2, 1), scalar([](const Eigen::VectorXd& x) { return x.sum(); }), box);
    EXPECT_NO_THROW(s.eval(Eigen::Vector2d(1, 2)));
    EXPECT_THROW(s.eval(Eigen::Vector2d(1.01, 1)), DomainError);
    EXPECT_THROW(s.eval(Eigen::Vector2d(0, -1e-9)), DomainError);
    EXPECT_THROW(s.eval(Eigen::Vector3d(0, 0, 0)), DomainError);
}

TEST(Eval, InterpolatesRecordedValuesOnPhysicalDomain) {
    Box box(Eigen::Vector3d(0.0, 0.0, 0.005235987755982988), Eigen::Vector3d(0.2, 2.0, 0.015707963267948967));
    auto f = [](const Eigen::VectorXd& t) {
        Eigen::VectorXd out(3);
        out << std::sin(20 * t[0]) * t[1], std::exp(-t[1]) + 100 * t[2], 1e3 * t[0] * t[2];
        return out;
    };
    auto s = fit(isotropic_grid(3, 5), f, box);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const Eigen::VectorXd v = s.values().row(static_cast<Eigen::Index>(k)).transpose();
        const Eigen::VectorXd e = s.eval(point_coordinates(s.grid()[k], box));
        EXPECT_LE((e - v).cwiseAbs().maxCoeff(), 1e-12 * (1 + v.cwiseAbs().maxCoeff()));
    }
}

TEST(Refine, NothingAboveToleranceTerminates) {
    auto s = fit(isotropic_grid(2, 3), scalar([](const Eigen::VectorXd& x) { return x[0] + 2 * x[1]; }), Box::unit(2));
    EXPECT_TRUE(refine(s, 1e-12).empty());
    EXPECT_TRUE(refine(s, std::numeric_limits<double>::infinity()).empty());
}

TEST(Refine, FlaggedRootProducesFourChildrenInTwoDimensions) {
    auto s = fit(isotropic_grid(2, 0), scalar([](const Eigen::VectorXd&) { return 1.0; }), Box::unit(2));
    auto fresh = refine(s, 0.5, RefinementMode::absolute);
    ASSERT_EQ(fresh.size(), 4u);
    for (const auto& p : fresh) EXPECT_EQ(p.total_level(), 1);
}

TEST(Refine, ReturnsOnlyNewDeduplicatedNodesOneLevelDeeper) {
    auto f = scalar([](const Eigen::VectorXd& x) { return std::exp(3 * x[0] * x[1]) + x[2]; });
    auto s = fit(isotropic_grid(3, 2), f, Box::unit(3));
    auto fresh = refine(s, 0.0);
    std::set<MultiIndex> unique(fresh.begin(), fresh.end());
    EXPECT_EQ(unique.size(), fresh.size());
    for (const auto& p : fresh) {
        EXPECT_EQ(p.total_level(), 3);
        EXPECT_FALSE(s.grid().contains(p));
    }
}

TEST(Refine, NegativeToleranceIsRejected) {
    auto s = fit(isotropic_grid(1, 1), scalar([](const Eigen::VectorXd& x) { return x[0]; }), Box::unit(1));
    EXPECT_THROW(refine(s, -1.0), ConfigurationError);
}

TEST(Properties, MultilinearExactnessAndVanishingSurpluses) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::array<double, 8> a{};
        for (auto& v : a) v = u(rng);
        auto f = scalar([a](const Eigen::VectorXd& x) {
            return a[0] + a[1] * x[0] + a[2] * x[1] + a[3] * x[2] + a[4] * x[0] * x[1] + a[5] * x[0] * x[2] +
                   a[6] * x[1] * x[2] + a[7] * x[0] * x[1] * x[2];
        });
        auto s3 = fit(isotropic_grid(3, 3), f, Box::unit(3));
        for (int i = 0; i <= 8; ++i)
            for (int j = 0; j <= 8; ++j)
                for (int k = 0; k <= 8; ++k) {
                    Eigen::Vector3d x(i / 8.0, j / 8.0, k / 8.0);
                    EXPECT_NEAR(s3.eval(x)[0], f(x)[0], 1e-12);
                }
        auto s5 = fit(isotropic_grid(3, 5), f, Box::unit(3));
        for (std::size_t k = 0; k < s5.size(); ++k)
            if (s5.grid()[k].total_level() > 3) EXPECT_NEAR(s5.surpluses()(static_cast<Eigen::Index>(k), 0), 0.0, 1e-12);
    }
}

TEST(Properties, SurplusDecayForSmoothFunctions) {
    auto f = scalar([](const Eigen::VectorXd& x) { return std::exp(-2.0 * (x.array() - 0.4).square().sum()); });
    for (std::size_t dim : {1u, 2u, 3u}) {
        auto s = fit(isotropic_grid(dim, 8), f, Box::unit(dim));
        double previous = std::numeric_limits<double>::infinity();
        for (int level = static_cast<int>(dim) + 1; level <= 8; ++level) {
            const double m = s.max_surplus_on_level(level, RefinementMode::absolute);
            EXPECT_LE(m, previous) << "dim=" << dim << " level=" << level;
            previous = m;
        }
    }
}

TEST(Properties, AdaptiveGridIsSubGridAndMonotoneInTolerance) {
    auto f = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd out(2);
        out << 1.0 / (0.05 + (x.array() - 0.7).square().sum()), std::tanh(10 * (x[0] - 0.3));
        return out;
    };
    const auto full = point_set(isotropic_grid(3, 6));
    std::set<MultiIndex> previous;
    bool first = true;
    for (double alpha : {1e-1, 1e-2, 1e-3, 0.0}) {
        auto s = adaptive_fit(3, 1, 6, alpha, f);
        auto pts = point_set(s.grid());
        EXPECT_TRUE(std::includes(full.begin(), full.end(), pts.begin(), pts.end())) << alpha;
        if (!first) EXPECT_TRUE(std::includes(pts.begin(), pts.end(), previous.begin(), previous.end())) << alpha;
        previous = pts;
        first = false;
    }
    // With zero tolerance and non-vanishing surpluses, adaptivity recovers the full grid.
    EXPECT_EQ(previous, full);
}

TEST(Properties, VectorSurrogateEqualsComponentwiseScalarSurrogates) {
    auto f = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd out(3);
        out << std::sin(x[0] + 2 * x[1]), x[0] * x[0] - x[1], std::exp(x[1]);
        return out;
    };
    const auto grid = isotropic_grid(2, 5);
    auto vec = fit(grid, f, Box::unit(2));
    for (Eigen::Index c = 0; c < 3; ++c) {
        auto comp = fit(grid, scalar([&](const Eigen::VectorXd& x) { return f(x)[c]; }), Box::unit(2));
        EXPECT_EQ(comp.surpluses().col(0), vec.surpluses().col(c));
        for (int t = 0; t <= 10; ++t) {
            Eigen::Vector2d x(t / 10.0, 1.0 - t / 13.0);
            EXPECT_EQ(comp.eval(x)[0], vec.eval(x)[c]);
        }
    }
}

TEST(AppendLevel, RejectsNodesThatAreNotDeeper) {
    auto s = fit(isotropic_grid(2, 2), scalar([](const Eigen::VectorXd& x) { return x[0]; }), Box::unit(2));
    std::vector<MultiIndex> pts{MultiIndex({2, 0}, {1, 1})};
    EXPECT_THROW(s.append_level(pts, RowMatrix::Zero(1, 1)), DomainError);
}
