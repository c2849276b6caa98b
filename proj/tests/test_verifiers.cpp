#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "specdens/families.hpp"
#include "specdens/report_io.hpp"
#include "specdens/sweep.hpp"
#include "specdens/verifiers.hpp"

using namespace specdens;

namespace {

SpectralOperator k2_op() { return diagonalize(graph_laplacian(2, complete_edges(2)), MeasureSpace::counting(2)); }
SpectralOperator c4_op() { return diagonalize(graph_laplacian(4, cycle_edges(4)), MeasureSpace::counting(4)); }

VectorXd vec(std::initializer_list<double> v) {
    VectorXd f(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        f(i++) = x;
    return f;
}

MonotoneProfile random_step(std::mt19937_64& rng, int k, double base = 0.0) {
    std::uniform_real_distribution<double> u(0.01, 5.0);
    std::vector<Breakpoint> b;
    for (int i = 0; i < k; ++i)
        b.push_back({u(rng), u(rng)});
    std::sort(b.begin(), b.end(), [](const Breakpoint& x, const Breakpoint& y) { return x.position < y.position; });
    return MonotoneProfile::step(b, base);
}

DensityState pure(const MeasureSpace& space, const VectorXd& f) { return DensityState::from_states(space, {f}); }

VectorXd gaussian(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i)
        f(i) = g(rng);
    return f;
}

// Random weighted graph with random vertex measure; at least one edge.
SpectralOperator random_graph(std::mt19937_64& rng, int lo = 4, int hi = 40) {
    const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
    auto edges = erdos_renyi(n, std::uniform_real_distribution<double>(0.1, 0.6)(rng), rng, 0.5, 2.0);
    if (edges.empty())
        edges.push_back({0, 1, 1.0});
    std::uniform_real_distribution<double> w(0.5, 2.0);
    std::vector<double> weights(static_cast<std::size_t>(n));
    for (auto& x : weights)
        x = w(rng);
    return diagonalize(graph_laplacian(static_cast<std::size_t>(n), edges, weights), MeasureSpace(weights, 1));
}

DensityState random_rho(std::mt19937_64& rng, const MeasureSpace& space, int rank) {
    std::vector<VectorXd> states;
    std::vector<double> probs;
    for (int i = 0; i < rank; ++i) {
        states.push_back(gaussian(rng, space.dimension()));
        probs.push_back(std::uniform_real_distribution<double>(0.1, 1.0)(rng));
    }
    return DensityState::from_states(space, states, probs);
}

} // namespace

TEST(Reports, MarginAndPassRule) {
    VerifyOptions opt;
    auto r = detail::make_report("x", 1.0, 2.0, {}, opt);
    EXPECT_EQ(r.margin, 1.0);
    EXPECT_EQ(r.relative_margin, 0.5);
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(detail::make_report("x", 1.0 + 1e-10, 1.0, {}, opt).pass);
    EXPECT_FALSE(detail::make_report("x", 1.0 + 1e-8, 1.0, {}, opt).pass);
    EXPECT_TRUE(detail::make_report("x", 1e6 + 1e-4, 1e6, {}, opt).pass);
    EXPECT_TRUE(detail::make_report("x", infinity, infinity, {}, opt).pass);
    EXPECT_TRUE(detail::make_report("x", 3.0, infinity, {}, opt).pass);
    EXPECT_FALSE(detail::make_report("x", infinity, 3.0, {}, opt).pass);
    EXPECT_FALSE(detail::make_report("x", std::nan(""), 3.0, {}, opt).pass);
}

TEST(HSobolev, TwoPointExample) {
    const auto op = k2_op();
    const auto r = verify_h_sobolev(op, vec({1, -1}));
    EXPECT_EQ(r.id, "h-sobolev");
    EXPECT_NEAR(r.lhs, 0.25, 1e-12);
    EXPECT_EQ(r.rhs, 1.0);
    EXPECT_TRUE(r.pass);
}

TEST(HSobolev, FourCycleEigenvector) {
    // F = 0.5 at 2 and 0.75 at 4, so G jumps by 0.25 at 2 and 0.0625 at 4. For the
    // eigenvector (1,0,-1,0), |f|^2 / 4E is 1/16 at two points and G^{-1}(1/16) = 2.
    const auto r = verify_h_sobolev(c4_op(), vec({1, 0, -1, 0}));
    EXPECT_NEAR(r.lhs, 2.0 * (1.0 / 16.0) * 2.0, 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(HSobolev, ScaleInvariantAndProjected) {
    const auto op = c4_op();
    std::mt19937_64 rng(3);
    const VectorXd f = gaussian(rng, 4);
    const auto a = verify_h_sobolev(op, f);
    const auto b = verify_h_sobolev(op, 1e-3 * f);
    EXPECT_NEAR(a.lhs, b.lhs, 1e-12 * a.lhs);
    EXPECT_GT(a.witness.parameters["projection_residual"].get<double>(), 0.0);
    EXPECT_THROW(verify_h_sobolev(op, VectorXd::Ones(4)), std::domain_error);
    EXPECT_THROW(verify_h_sobolev(op, VectorXd::Zero(4)), std::invalid_argument);
}

TEST(NSobolev, TwoPointExample) {
    const auto r = verify_n_sobolev(k2_op(), vec({1, -1}));
    EXPECT_NEAR(r.lhs, 2.0 * (1.0 / 16.0) / (std::log(4.0) / 2.0), 1e-9);
    EXPECT_EQ(r.rhs, std::log(2.0));
    EXPECT_EQ(r.exclusions, 0.0);
    EXPECT_TRUE(r.pass);
}

TEST(NSobolev, ScaleInvariant) {
    const auto op = c4_op();
    const auto a = verify_n_sobolev(op, vec({1, 2, -0.5, 0}));
    const auto b = verify_n_sobolev(op, vec({10, 20, -5, 0}));
    EXPECT_NEAR(a.lhs, b.lhs, 1e-12);
    EXPECT_EQ(a.rhs, b.rhs);
}

TEST(NSobolev, RandomGraphsPass) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto op = random_graph(rng);
        const auto r = verify_n_sobolev(op, gaussian(rng, op.size()));
        ASSERT_TRUE(r.pass) << report_line(r);
        ASSERT_EQ(r.exclusions, 0.0);
    }
}

TEST(NSobolev, HeatIntegralConstant) { EXPECT_NEAR(heat_sobolev_integral(), 2.0 * std::log(2.0), 1e-8); }

TEST(RhoSobolev, TwoPointExample) {
    const auto op = k2_op();
    const auto rho = pure(op.space(), vec({1, -1}) / std::sqrt(2.0));
    const auto r = verify_rho_sobolev(op, rho);
    EXPECT_NEAR(r.lhs, 2.0, 1e-12);
    EXPECT_NEAR(r.rhs, 8.0, 1e-12);
    for (double c : {0.01, 3.0, 1e4}) {
        const auto s = verify_rho_sobolev(op, rho.scaled(c));
        EXPECT_NEAR(s.lhs / c, r.lhs, 1e-12);
        EXPECT_NEAR(s.rhs / c, r.rhs, 1e-12);
        EXPECT_EQ(s.pass, r.pass);
    }
}

TEST(RhoSobolev, FourCycleProjector) {
    const auto op = c4_op();
    const auto rho = DensityState::from_kernel(projector(op, Interval::half_open, 2.0));
    const auto r = verify_rho_sobolev(op, rho);
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.margin, 0.0);
}

TEST(RhoSobolev, KernelStatesRejected) {
    const auto op = k2_op();
    EXPECT_THROW(verify_rho_sobolev(op, pure(op.space(), vec({1, 1}))), std::domain_error);
}

TEST(RhoMoser, IntegralExamples) {
    const auto op = k2_op();
    const auto r = verify_rho_moser_integral(op, pure(op.space(), vec({1, -1}) / std::sqrt(2.0)), Interval::half_open);
    EXPECT_NEAR(r.lhs, 2.0, 1e-12);
    EXPECT_NEAR(r.rhs, 8.0, 1e-12);
    const auto c = verify_rho_moser_integral(op, pure(op.space(), vec({1, 1}) / std::sqrt(2.0)), Interval::closed);
    EXPECT_EQ(c.lhs, 0.0);
    EXPECT_NEAR(c.rhs, 0.0, 1e-15);
    EXPECT_TRUE(c.pass);
}

TEST(RhoMoser, ClosedFlavorCutsOffKernelStates) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto op = random_graph(rng, 4, 20);
        std::vector<VectorXd> kernel_states;
        for (Eigen::Index j = 0; j < op.size(); ++j)
            if (op.is_kernel(j))
                kernel_states.push_back(op.eigenvectors().col(j) * std::uniform_real_distribution<double>(0.5, 2.0)(rng));
        const auto rho = DensityState::from_states(op.space(), kernel_states);
        const auto r = verify_rho_moser_integral(op, rho, Interval::closed);
        ASSERT_EQ(r.lhs, 0.0);
        ASSERT_TRUE(r.pass);
    }
}

TEST(RhoMoser, RandomStatesBothFlavors) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto op = random_graph(rng);
        const auto rho = random_rho(rng, op.space(), std::uniform_int_distribution<int>(1, 4)(rng));
        for (auto iv : {Interval::half_open, Interval::closed}) {
            const auto r = verify_rho_moser_integral(op, rho, iv);
            ASSERT_TRUE(r.pass) << report_line(r);
        }
    }
}

TEST(RhoMoser, PartitionExamples) {
    const auto op = c4_op();
    const auto rho = DensityState::from_kernel(projector(op, Interval::half_open, 2.0));
    for (auto iv : {Interval::half_open, Interval::closed}) {
        const auto integral = verify_rho_moser_integral(op, rho, iv);
        const auto singletons = verify_rho_moser_partition(op, rho, {{0}, {1}, {2}, {3}}, iv);
        EXPECT_NEAR(singletons.lhs, integral.lhs, 1e-12);
        EXPECT_NEAR(singletons.rhs, integral.rhs, 1e-12);
        EXPECT_TRUE(verify_rho_moser_partition(op, rho, {{0, 1, 2, 3}}, iv).pass);
        EXPECT_TRUE(verify_rho_moser_partition(op, rho, {{0, 1}, {2, 3}}, iv).pass);
    }
    EXPECT_THROW(verify_rho_moser_partition(op, rho, {{0, 1}, {1, 2, 3}}, Interval::closed), std::invalid_argument);
    EXPECT_THROW(verify_rho_moser_partition(op, rho, {{0, 1}, {2}}, Interval::closed), std::invalid_argument);
}

TEST(RhoMoser, SingletonPartitionsMatchIntegralOnRandomGraphs) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const auto op = random_graph(rng, 4, 12);
        const auto counting = diagonalize(op.matrix(), op.space());
        const auto rho = random_rho(rng, op.space(), 2);
        std::vector<std::vector<int>> singletons;
        for (std::size_t x = 0; x < op.space().points(); ++x)
            singletons.push_back({static_cast<int>(x)});
        for (auto iv : {Interval::half_open, Interval::closed}) {
            const auto a = verify_rho_moser_integral(counting, rho, iv);
            const auto b = verify_rho_moser_partition(counting, rho, singletons, iv);
            ASSERT_NEAR(a.lhs, b.lhs, 1e-10 * std::max(1.0, a.lhs));
        }
    }
}

TEST(FaberKrahn, MixedTwoPointExample) {
    const auto op = k2_op();
    const auto rho = pure(op.space(), vec({1, 0}));
    const auto rs = verify_faber_krahn_mixed(op, rho, {0}, Interval::closed);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_EQ(rs[0].id, "faber-krahn-mixed-left");
    EXPECT_NEAR(rs[0].lhs, 0.25, 1e-12);
    EXPECT_NEAR(rs[0].rhs, 1.0, 1e-12);
    EXPECT_NEAR(rs[1].lhs, 1.0, 1e-12);
    EXPECT_NEAR(rs[1].rhs, 1.0, 1e-12);
    EXPECT_TRUE(rs[0].pass && rs[1].pass);
    EXPECT_THROW(verify_faber_krahn_mixed(op, pure(op.space(), vec({1, 1})), {0}, Interval::closed),
                 std::invalid_argument);
    EXPECT_THROW(verify_faber_krahn_mixed(op, rho, {0}, Interval::half_open), std::domain_error);
}

TEST(FaberKrahn, DirichletFourCycle) {
    const auto r = verify_faber_krahn_dirichlet(c4_op(), {2}, Interval::closed);
    EXPECT_NEAR(r.lhs, 1.0, 1e-12);
    EXPECT_NEAR(r.rhs, 4.0, 1e-12);
    EXPECT_NEAR(r.witness.parameters["lambda"].get<double>(), 2.0, 1e-12);
}

TEST(FaberKrahn, WholeSpaceCountsEverything) {
    std::mt19937_64 rng(2);
    for (int h : {1, 2, 3}) {
        std::vector<double> w{1.0, 2.0, 0.5};
        MeasureSpace space(w, h);
        const auto op = diagonalize(random_block_operator(space, rng), space);
        const std::vector<int> all{0, 1, 2};
        EXPECT_EQ(dirichlet_counting(op, all, op.lambda_max()), 3 * h);
        const auto r = verify_faber_krahn_dirichlet(op, all, Interval::closed);
        EXPECT_TRUE(r.pass);
        const auto f = decay_profile(op, ProfileFlavor::density(), Interval::closed);
        EXPECT_LE(3.0 * h, 4.0 * space.total_measure() * f(4.0 * op.lambda_max()) + 1e-9);
    }
}

TEST(FaberKrahn, BalancedPair) {
    const auto op = c4_op();
    for (double eps : {0.2, 0.5, 0.8}) {
        const auto rs = verify_balanced_faber_krahn(op, {0, 1}, eps, Interval::closed);
        ASSERT_EQ(rs.size(), 2u);
        EXPECT_TRUE(rs[0].pass);
        EXPECT_TRUE(rs[1].pass);
    }
    EXPECT_THROW(verify_balanced_faber_krahn(op, {0}, 1.0, Interval::closed), std::invalid_argument);
}

TEST(PureMoser, NashTwoPoint) {
    const auto op = k2_op();
    const auto r = verify_pure_moser_nash(op, vec({1, -1}), PureInequality::nash, Interval::half_open);
    EXPECT_NEAR(r.lhs, 4.0, 1e-12);
    EXPECT_NEAR(r.rhs, 32.0, 1e-12);
    for (double c : {0.5, 7.0}) {
        const auto s = verify_pure_moser_nash(op, c * vec({1, -1}), PureInequality::nash, Interval::half_open);
        EXPECT_NEAR(s.lhs / (c * c), r.lhs, 1e-12);
        EXPECT_NEAR(s.rhs / (c * c), r.rhs, 1e-12);
    }
}

TEST(PureMoser, FaberKrahnPureTwoPoint) {
    const auto op = k2_op();
    const auto r =
        verify_pure_moser_nash(op, vec({1, 0}), PureInequality::faber_krahn_pure, Interval::closed, {}, {0});
    EXPECT_EQ(r.lhs, 1.0);
    EXPECT_NEAR(r.rhs, 4.0, 1e-12);
    EXPECT_THROW(verify_pure_moser_nash(op, vec({1, 0}), PureInequality::faber_krahn_pure, Interval::closed, {}, {1}),
                 std::invalid_argument);
    EXPECT_THROW(verify_pure_moser_nash(op, vec({1, 0}), PureInequality::moser_l2, Interval::half_open),
                 std::domain_error);
}

TEST(PureMoser, RandomFunctionsAllVariants) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 300; ++trial) {
        const auto op = random_graph(rng, 4, 25);
        const VectorXd f = gaussian(rng, op.size());
        for (auto iv : {Interval::half_open, Interval::closed}) {
            const VectorXd g = iv == Interval::half_open ? project_to_range(op, f).state : f;
            for (auto which : {PureInequality::moser_l2, PureInequality::moser_l1, PureInequality::nash}) {
                const auto r = verify_pure_moser_nash(op, g, which, iv);
                ASSERT_TRUE(r.pass) << report_line(r);
            }
        }
        const VectorXd d = VectorXd::Unit(op.size(), 0) + 0.5 * VectorXd::Unit(op.size(), 1);
        const auto r = verify_pure_moser_nash(op, d, PureInequality::faber_krahn_pure, Interval::closed, {}, {0, 1});
        ASSERT_TRUE(r.pass) << report_line(r);
    }
}

TEST(LpSobolev, Constants) {
    const auto k = polynomial_constants(1.0, 2.0);
    EXPECT_EQ(k.p, 4.0);
    EXPECT_EQ(k.c1, 2.0);
    EXPECT_NEAR(k.c2, 32.0, 1e-12);
    EXPECT_NEAR(k.c3, 32.0, 1e-12);
    EXPECT_THROW(polynomial_constants(1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(polynomial_constants(0.0, 2.0), std::invalid_argument);
}

TEST(LpSobolev, FourCycle) {
    const auto op = c4_op();
    const double c = 0.5 / 4.0;
    const VectorXd f = vec({1, 0, -1, 0});
    const auto r = verify_lp_sobolev(op, f, c, 2.0);
    // ||f||_4 = 2^{1/4}; E = 4; C1 = 0.25.
    EXPECT_NEAR(r.lhs, std::pow(2.0, 0.25), 1e-12);
    EXPECT_NEAR(r.rhs, 2.0 * std::pow(0.25, 0.25) * 2.0, 1e-12);
    EXPECT_TRUE(r.pass);
    EXPECT_THROW(verify_lp_sobolev(op, f, 0.1, 2.0), std::domain_error);
}

TEST(LpSobolev, SingleStateFamilyIsThePNormBound) {
    const auto op = c4_op();
    const double c = 0.125;
    VectorXd f = vec({1, 0.3, -1, -0.3});
    f /= std::sqrt(l2_norm2(op.space(), f));
    const auto lp = verify_lp_sobolev(op, f, c, 2.0);
    const auto fam = polynomial_consequences(c, 2.0, op, {f});
    ASSERT_EQ(fam[0].id, "orthonormal-family");
    EXPECT_NEAR(fam[0].lhs, std::pow(lp.lhs, 4.0), 1e-12);
    EXPECT_NEAR(fam[0].rhs, std::pow(lp.rhs, 4.0), 1e-10);
    for (const auto& r : fam)
        EXPECT_TRUE(r.pass) << report_line(r);
}

TEST(HeatSpectral, TwoPointEquality) {
    const auto rs = compare_heat_spectral(k2_op());
    ASSERT_EQ(rs.size(), 4u);
    for (const auto& r : rs) {
        EXPECT_TRUE(r.pass) << report_line(r);
    }
    EXPECT_NEAR(rs[0].lhs, rs[0].rhs, 1e-12);
    EXPECT_NEAR(rs[1].lhs, rs[1].rhs, 1e-12);
    EXPECT_NEAR(rs[2].lhs, rs[2].rhs, 1e-12);
}

TEST(HeatSpectral, RandomGraph) {
    std::mt19937_64 rng(31);
    const auto op = random_graph(rng, 20, 20);
    const auto rs = compare_heat_spectral(op);
    EXPECT_GE(rs[0].witness.parameters["cases"].get<int>(), 50);
    for (const auto& r : rs)
        EXPECT_TRUE(r.pass) << report_line(r);
}

TEST(HeatSpectral, FourCycleReverse) {
    const auto rs = compare_heat_spectral(c4_op());
    ASSERT_EQ(rs.size(), 4u);
    EXPECT_EQ(rs[3].id, "reverse-heat-integral");
    EXPECT_TRUE(rs[3].pass);
    // Direct check of G(y) <= e M(1/y) at a few points with the closed-form M.
    const auto g = g_transform(decay_profile(c4_op(), ProfileFlavor::ultra(), Interval::half_open));
    for (double y : {0.5, 2.0, 3.0, 5.0, 100.0}) {
        const double t = 1.0 / y;
        const double m = 0.5 * std::exp(-2.0 * t) / 2.0 + 0.25 * std::exp(-4.0 * t) / 4.0;
        EXPECT_LE(g(y), std::exp(1.0) * m);
    }
}

TEST(SobolevFaberKrahn, TwoPointExample) {
    const auto op = k2_op();
    const auto r = verify_sobolev_to_fk(op, pure(op.space(), vec({1, -1}) / std::sqrt(2.0)), {0, 1});
    EXPECT_NEAR(r.lhs, 1.0, 1e-12);
    EXPECT_NEAR(r.rhs, 8.0, 1e-12);
    EXPECT_TRUE(verify_sobolev_fk_dirichlet(c4_op(), {0, 1}).pass);
}

TEST(SobolevFaberKrahn, LambdaGDominatesF) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 500; ++trial) {
        const auto f = random_step(rng, std::uniform_int_distribution<int>(1, 8)(rng));
        const auto g = g_transform(f);
        for (const auto& bp : f.breakpoints())
            ASSERT_GE(bp.position * g(bp.position), f(bp.position) * (1.0 - 1e-12));
        ASSERT_TRUE(verify_lambda_g(f).pass);
    }
    EXPECT_TRUE(verify_lambda_g(c4_op()).pass);
}

TEST(SobolevFaberKrahn, IntegralDominatesDiscrete) {
    const auto op = c4_op();
    const auto rho = DensityState::from_kernel(projector(op, Interval::half_open, 2.0));
    for (auto iv : {Interval::half_open, Interval::closed}) {
        EXPECT_TRUE(verify_integral_dominates_discrete(op, rho, {{0}, {1}, {2}, {3}}, iv).pass);
        EXPECT_TRUE(verify_integral_dominates_discrete(op, rho, {{0, 1}, {2, 3}}, iv).pass);
    }
}

TEST(Young, RandomTriples) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto f = random_step(rng, 4, trial % 2 ? u(rng) : 0.0);
        const auto r = verify_young(f, u(rng), u(rng));
        ASSERT_TRUE(r.pass) << report_line(r);
    }
}

TEST(Doubling, LargestEpsilonForPowers) {
    for (double a : {1.5, 2.0, 3.0}) {
        const double eps = largest_doubling_epsilon(MonotoneProfile::power(1.0, a), 1.0, 64);
        EXPECT_NEAR(eps, std::pow(2.0, a - 1.0) - 1.0, 1e-9);
    }
    EXPECT_NEAR(largest_doubling_epsilon(MonotoneProfile::power(1.0, 1.0), 1.0, 64), 0.0, 1e-9);
}

TEST(ReportIo, JsonRoundTrip) {
    auto r = detail::make_report("x", 1.5, infinity, {}, {});
    r.witness.operator_digest = "abc";
    r.witness.parameters["b"] = 1;
    r.witness.parameters["a"] = 2;
    const auto line = report_line(r);
    EXPECT_NE(line.find("\"rhs\":\"inf\""), std::string::npos);
    EXPECT_LT(line.find("\"exclusions\""), line.find("\"id\""));
    EXPECT_LT(line.find("\"a\""), line.find("\"b\""));
    std::istringstream in(line + "\n\n" + line + "\n");
    const auto back = read_jsonl(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(report_line(back[0]), line);
    std::istringstream bad("{\"id\": 1}\n");
    EXPECT_THROW(read_jsonl(bad, "bad.jsonl"), std::invalid_argument);
}

TEST(ReportIo, MergeIsOrderIndependent) {
    SweepOptions o;
    o.count = 3;
    o.seed = 5;
    o.checks = parse_checks("h-sobolev,nash");
    const auto all = run_sweep(o);
    std::vector<InequalityReport> a(all.begin(), all.begin() + 4);
    std::vector<InequalityReport> b(all.begin() + 2, all.end());
    const auto m1 = merge_reports({a, b});
    const auto m2 = merge_reports({b, a, a});
    ASSERT_EQ(m1.size(), all.size());
    for (std::size_t i = 0; i < m1.size(); ++i)
        EXPECT_EQ(report_line(m1[i]), report_line(m2[i]));
    auto changed = all[0];
    changed.lhs += 1.0;
    EXPECT_THROW(merge_reports({all, {changed}}), std::invalid_argument);
    const auto csv = csv_summary(all);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,reports,passed,failed,min_margin,min_relative_margin,exclusions");
    EXPECT_NE(csv.find("\nnash,6,6,0,"), std::string::npos);
}

TEST(Sweep, DeterministicAcrossThreads) {
    SweepOptions o;
    o.count = 12;
    o.seed = 99;
    o.threads = 1;
    const auto a = run_sweep(o);
    o.threads = 3;
    const auto b = run_sweep(o);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        ASSERT_EQ(report_line(a[i]), report_line(b[i]));
    EXPECT_TRUE(all_pass(a));
}

TEST(Sweep, CheckSelection) {
    EXPECT_EQ(parse_checks("").size(), check_names().size());
    EXPECT_EQ(parse_checks("nash, h-sobolev").size(), 2u);
    EXPECT_THROW(parse_checks("nash,bogus"), std::invalid_argument);
}

TEST(Sweep, FixedOperatorTrials) {
    SweepOptions o;
    o.seed = 4;
    o.checks = parse_checks("h-sobolev");
    const auto rs = run_trials(c4_op(), 100, o);
    ASSERT_EQ(rs.size(), 100u);
    EXPECT_TRUE(all_pass(rs));
    EXPECT_EQ(rs[99].witness.parameters["trial"].get<int>(), 99);
}
