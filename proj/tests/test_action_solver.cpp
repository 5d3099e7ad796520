#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "contact_action/action_solver.hpp"

using namespace contact_action;

namespace {

DPConfig grid(int m, double dt, double lambda = 0.5, double T = 1.0)
{
    DPConfig c;
    c.m = m;
    c.dt = dt;
    c.v_max = default_v_max(lambda, T, 1, dt);
    return c;
}

double discounted_oracle(double lambda, double d, double t)
{
    const double e = std::exp(-lambda * t);
    return lambda * d * d * e / (2.0 * (1.0 - e));
}

} // namespace

TEST(DPConfig, Validation)
{
    DPConfig c = grid(100, 0.01);
    EXPECT_NO_THROW(c.validate());
    c.v_max = 60.0;
    EXPECT_THROW(c.validate(), Error); // v_max dt >= 1/2
    c = grid(100, 0.01);
    c.refinement = -1;
    EXPECT_THROW(c.validate(), Error);
    c = grid(100, 0.01);
    c.v_max = 0.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(DPConfig, AutomaticRefinement)
{
    EXPECT_EQ(grid(200, 0.005).resolved(1).refinement, 6);
    EXPECT_EQ(grid(400, 0.01).resolved(1).refinement, 4);
    EXPECT_EQ(grid(200, 0.02).resolved(1).refinement, 3);
    DPConfig fixed = grid(200, 0.005);
    fixed.refinement = 2;
    EXPECT_EQ(fixed.resolved(1).refinement, 2);
}

TEST(DPConfig, StepReachCoversOneCell)
{
    DPConfig c = grid(10, 0.005);
    EXPECT_LT(c.v_max * c.dt, 0.1);
    EXPECT_DOUBLE_EQ(c.step_reach(), 0.1);
    EXPECT_DOUBLE_EQ(grid(200, 0.01).step_reach(), grid(200, 0.01).v_max * 0.01);
}

TEST(DefaultVMax, FormulaAndClamp)
{
    EXPECT_NEAR(default_v_max(0.5, 1.0, 1, 0.005), 3.0 * (1.0 + 0.5 * std::exp(0.5)), 1e-12);
    EXPECT_DOUBLE_EQ(default_v_max(4.0, 1.0, 1, 0.02), 0.45 / 0.02);
}

TEST(ActionField, LayersAndCsv)
{
    EXPECT_THROW(layer_count(1.0, 0.3), Error);
    EXPECT_EQ(layer_count(1.0, 0.01), 100);
    const auto L = catalog::lagrangian("discounted", {});
    const ActionField f = semigroup_march(L, TorusPoint{0.0}, 0.0, 0.1, grid(10, 0.05));
    std::ostringstream os;
    write_field_csv(os, f);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x_1,h");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 2 * 10);
    std::ostringstream meta;
    write_field_sidecar(meta, f);
    for (const char* key : {"x0=", "u0=", "T=", "m=", "dt=", "v_max=", "entry=discounted", "param.lambda="}) {
        EXPECT_NE(meta.str().find(key), std::string::npos) << key;
    }
    EXPECT_THROW(f.value_at(TorusPoint{0.0}, 0.2), Error);
}

TEST(BaseLayer, StationaryOneStepValue)
{
    const auto L = catalog::lagrangian("nonlinear_u", {{"epsilon", 0.3}});
    const double u0 = 0.4, dt = 0.01;
    const ActionField f = picard_iterate(L, TorusPoint{0.2}, u0, 0.1, grid(50, dt)).field;
    EXPECT_NEAR(f.value_at(TorusPoint{0.2}, dt), u0 + dt * L.value(TorusPoint{0.2}, u0, FiberVector{0.0}), 1e-14);
}

TEST(Picard, FreeParticleConvergesToClosedForm)
{
    const auto L = catalog::lagrangian("classical", {{"epsilon", 0.0}});
    const DPConfig cfg = grid(100, 0.02, 0.0);
    const auto res = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, cfg);
    EXPECT_LE(res.trace.size(), 2u); // u-independent: the second pass changes nothing
    const double dx = 0.01;
    for (double x : {0.1, 0.3, 0.5, 0.8}) {
        const double exact = std::min({x * x, (x - 1) * (x - 1)}) / 2.0;
        EXPECT_NEAR(res.field.value_at(TorusPoint{x}, 1.0), exact, 2.0 * dx * dx / 0.02 + 1e-4) << x;
    }
}

TEST(Picard, UIndependentEqualsSemigroupBitwise)
{
    const auto L = catalog::lagrangian("classical", {{"epsilon", 0.3}});
    const DPConfig cfg = grid(60, 0.02, 0.0);
    const auto a = picard_iterate(L, TorusPoint{0.1}, 0.3, 1.0, cfg).field;
    const auto b = semigroup_march(L, TorusPoint{0.1}, 0.3, 1.0, cfg);
    EXPECT_EQ(a.values(), b.values());
}

TEST(Picard, DiscountedOracle)
{
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.0}, {"lambda", 0.5}});
    const DPConfig cfg = grid(100, 0.01);
    const auto res = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, cfg);
    const double h = res.field.value_at(TorusPoint{0.3}, 1.0);
    EXPECT_NEAR(h, discounted_oracle(0.5, 0.3, 1.0), 2.0 * 1e-4 / 0.01 + 1e-3);
    // Picard and the semigroup are two discretizations of one fixed point
    const auto sg = semigroup_march(L, TorusPoint{0.0}, 0.0, 1.0, cfg);
    EXPECT_NEAR(sg.value_at(TorusPoint{0.3}, 1.0), h, 5e-3);
}

TEST(Picard, TraceContractsFactorially)
{
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.3}, {"lambda", 0.5}});
    const auto res = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, grid(50, 0.02));
    ASSERT_GE(res.trace.size(), 4u);
    for (std::size_t i = 1; i + 1 < res.trace.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        if (res.trace[i + 1].sup_diff < 1e-13) continue;
        EXPECT_LE(res.trace[i + 1].sup_diff / res.trace[i].sup_diff, 1.2 * 0.5 / (n + 1.0)) << "n=" << n;
    }
    EXPECT_LE(res.trace.back().sup_diff, 1e-9);
}

TEST(Picard, NonConvergenceCarriesTrace)
{
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.3}});
    try {
        picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, grid(30, 0.05), 1e-9, 2);
        FAIL() << "expected non-convergence";
    } catch (const PicardNonConvergence& e) {
        EXPECT_EQ(e.kind(), ErrorKind::no_convergence);
        EXPECT_EQ(e.trace().size(), 2u);
        EXPECT_EQ(e.trace()[1].iteration, 2);
    }
}

TEST(Picard, UniqueFixedPointFromDifferentStarts)
{
    const auto L = catalog::lagrangian("nonlinear_u", {{"epsilon", 0.3}, {"a", 0.3}});
    const DPConfig cfg = grid(40, 0.025);
    const auto a = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, cfg, 1e-11, 60, 0.0).field;
    const auto b = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, cfg, 1e-11, 60, 5.0).field;
    const auto c = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, cfg, 1e-11, 60, -5.0).field;
    EXPECT_LE(sup_difference(a, b), 1e-9);
    EXPECT_LE(sup_difference(a, c), 1e-9);
}

TEST(Solver, WorkerCountDoesNotChangeOutput)
{
    const auto L = catalog::lagrangian("nonlinear_u", {{"epsilon", 0.3}}, 2);
    DPConfig cfg;
    cfg.m = 16;
    cfg.dt = 0.05;
    cfg.v_max = default_v_max(0.3, 0.5, 2, cfg.dt);
    SolverOptions opt;
    opt.workers = 1;
    const ActionSolver s(L, cfg, opt);
    const auto a = s.solve(TorusPoint{0.0, 0.0}, 0.0, 0.5);
    const auto b = s.with_workers(3).solve(TorusPoint{0.0, 0.0}, 0.0, 0.5);
    EXPECT_EQ(a.values(), b.values());
}

TEST(Solver, CoarseGridReachesEveryNode)
{
    // v_max dt is a fraction of a cell here; one-cell steps keep every node reachable
    const auto L = catalog::lagrangian("discounted", {});
    const DPConfig cfg = grid(10, 0.005);
    const auto f = semigroup_march(L, TorusPoint{0.0}, 0.0, 1.0, cfg);
    for (double v : f.layer(f.layers())) EXPECT_TRUE(std::isfinite(v));
}

TEST(Backtrack, EndpointsAndValues)
{
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.3}});
    const auto f = picard_iterate(L, TorusPoint{0.0}, 0.0, 1.0, grid(80, 0.02)).field;
    const TorusPoint x{0.3};
    const Curve c = backtrack_calibrated(f, L, x, 1.0);
    ASSERT_EQ(c.size(), 51u);
    EXPECT_EQ(c.front().x, TorusPoint{0.0});
    EXPECT_EQ(c.front().u, 0.0);
    EXPECT_NEAR(distance(c.back().x, x), 0.0, 1e-12);
    EXPECT_NEAR(c.back().u, f.value_at(x, 1.0), 1e-12);
    EXPECT_THROW(backtrack_calibrated(f, L, x, 0.333), Error);
}

TEST(Backtrack, FreeParticleMovesAtConstantSpeed)
{
    const auto L = catalog::lagrangian("classical", {{"epsilon", 0.0}});
    const auto f = semigroup_march(L, TorusPoint{0.0}, 0.0, 1.0, grid(100, 0.02, 0.0));
    const Curve c = backtrack_calibrated(f, L, TorusPoint{0.3}, 1.0);
    double mean = 0.0;
    for (std::size_t i = 1; i < c.size(); ++i) mean += displacement(c[i - 1].x, c[i].x)[0];
    EXPECT_NEAR(mean, 0.3, 1e-12);
    EXPECT_LT(herglotz_residual(L, c, 12), 0.5);
}

TEST(Herglotz, ExactTrajectoryIsSecondOrderAndPerturbationIsDetected)
{
    const auto H = catalog::hamiltonian("discounted", {{"epsilon", 0.3}});
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.3}});
    const ContactState s0{TorusPoint{0.0}, 0.0, FiberVector{1.0}, 0.0};
    const Curve coarse = curve_from_trajectory(integrate(H, s0, 1.0, 0.01));
    const Curve fine = curve_from_trajectory(integrate(H, s0, 1.0, 0.005));
    const double rc = herglotz_residual(L, coarse);
    const double rf = herglotz_residual(L, fine);
    EXPECT_GT(std::log2(rc / rf), 1.8);

    Curve bad = coarse;
    bad[50].v = 2.0 * bad[50].v;
    EXPECT_GT(herglotz_residual(L, bad), 10.0 * rc);
    EXPECT_THROW(herglotz_residual(L, coarse, 0), Error);
}

TEST(Markov, DefectSmallAndArgumentsChecked)
{
    const auto L = catalog::lagrangian("discounted", {{"epsilon", 0.3}});
    SolverOptions opt;
    opt.workers = 1;
    const ActionSolver s(L, grid(40, 0.025), opt);
    const auto f = s.solve(TorusPoint{0.0}, 0.0, 1.0);
    const auto d = markov_defect(s, f, 0.5, 0.5, 2);
    EXPECT_EQ(d.fresh_solves, 20);
    EXPECT_LT(d.defect, 0.05);
    EXPECT_THROW(markov_defect(s, f, 0.5, 0.7), Error);
    EXPECT_THROW(markov_defect(s, f, 0.5, 0.5, 0), Error);
}

TEST(TriangleB, StationaryShortTime)
{
    const auto L = catalog::lagrangian("nonlinear_u", {{"epsilon", 0.3}});
    SolverOptions opt;
    opt.workers = 1;
    const ActionSolver s(L, grid(50, 0.01), opt);
    const TorusPoint x{0.4};
    const double u = 0.7;
    EXPECT_NEAR(triangle_b(s, x, u, x, 0.01), 0.01 * L.value(x, u, FiberVector{0.0}), 1e-14);
    EXPECT_THROW(triangle_b(s, x, u, x, 0.0), Error);
}
