#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "contact_action/harness.hpp"

using namespace contact_action;

namespace {

RunConfig coarse(const std::string& entry = "discounted")
{
    RunConfig c;
    c.entry = entry;
    c.params = {{"epsilon", 0.3}};
    c.m = 40;
    c.dt = 0.025;
    c.workers = 1;
    return c.for_entry(entry);
}

IterationTrace factorial_trace(double lambda, double T, int n, double noise = 1.0)
{
    IterationTrace tr;
    double d = T;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) d *= lambda * T / i;
        tr.push_back({i, d * (i == n ? noise : 1.0), 0.0});
    }
    return tr;
}

} // namespace

TEST(ToleranceModel, TermsAddUp)
{
    const ToleranceModel m{1.0, 2.0, 3.0, 4.0, 5.0};
    const ToleranceModel::Grid g{0.01, 0.005, 1e-9, 0.5, 0.02};
    EXPECT_NEAR(m(g), 0.01 + 0.01 + 3e-9 + 2.0 + 0.1, 1e-15);
    EXPECT_NE(m.describe(g).find("dx^2/dt"), std::string::npos);
}

TEST(ToleranceModel, GridOfConfig)
{
    RunConfig c;
    c.m = 200;
    c.dt = 0.005;
    const auto g = ToleranceModel::grid_of(c);
    EXPECT_DOUBLE_EQ(g.dx, 0.005);
    EXPECT_DOUBLE_EQ(g.diffusion, 0.005);
    EXPECT_NEAR(g.quantum, 0.005 / (6 * 0.005), 1e-15);
    for (const char* family : {"agreement", "boundary", "gronwall", "herglotz_dp", "markov", "schemes", "short_time", "triangle"}) {
        EXPECT_EQ(tolerance_models().count(family), 1u) << family;
    }
}

TEST(Reports, CsvLayout)
{
    CheckReport a;
    a.name = "x.one";
    a.measured = 0.25;
    a.threshold = 0.5;
    a.pass = true;
    a.seconds = 1.5;
    CheckReport b = a;
    b.name = "x.two";
    b.pass = false;
    std::ostringstream with, without;
    write_report_csv(with, {a, b});
    write_report_csv(without, {a, b}, false);
    EXPECT_EQ(with.str(), "check,measured,threshold,pass,seconds\nx.one,0.25,0.5,1,1.5\nx.two,0.25,0.5,0,1.5\n");
    EXPECT_EQ(without.str(), "check,measured,threshold,pass\nx.one,0.25,0.5,1\nx.two,0.25,0.5,0\n");
    EXPECT_FALSE(all_passed({a, b}));
    EXPECT_TRUE(all_passed({a}));
    std::ostringstream text;
    write_report_text(text, {a, b});
    EXPECT_NE(text.str().find("1/2 checks passed"), std::string::npos);
}

TEST(ConvergenceReports, ExactFactorialTracePasses)
{
    const auto tr = factorial_trace(0.5, 1.0, 8);
    const auto rate = convergence_rate_report(tr, 0.5, 1.0, "discounted");
    EXPECT_TRUE(rate.pass);
    EXPECT_NEAR(rate.measured, 1.0, 1e-12);
    const auto fact = convergence_factorial_report(tr, 0.5, 1.0, "discounted");
    EXPECT_TRUE(fact.pass);
    EXPECT_NEAR(fact.measured, 1.0, 1e-12);
}

TEST(ConvergenceReports, GeometricTraceFails)
{
    IterationTrace tr;
    for (int i = 1; i <= 6; ++i) tr.push_back({i, std::pow(0.5, i), 0.0});
    EXPECT_FALSE(convergence_rate_report(tr, 0.5, 1.0, "discounted").pass);
    EXPECT_FALSE(convergence_factorial_report(tr, 0.5, 1.0, "discounted").pass);
}

TEST(ConvergenceReports, ShortTraceIsInconclusive)
{
    const auto r = convergence_rate_report(factorial_trace(0.5, 1.0, 2), 0.5, 1.0, "discounted");
    EXPECT_TRUE(r.pass);
    EXPECT_NE(r.notes.find("inconclusive"), std::string::npos);
}

TEST(FreeParticle, ClosedForm)
{
    EXPECT_NEAR(free_particle_action(TorusPoint{0.0}, TorusPoint{0.3}, 1.0), 0.045, 1e-15);
    EXPECT_NEAR(free_particle_action(TorusPoint{0.0}, TorusPoint{0.8}, 2.0), 0.01, 1e-15);
    EXPECT_NEAR(free_particle_action(TorusPoint{0.0, 0.0}, TorusPoint{0.9, 0.2}, 1.0), 0.025, 1e-15);
}

TEST(Checks, UniquenessOnCoarseGrid)
{
    const auto r = check_uniqueness(coarse("nonlinear_u"));
    EXPECT_TRUE(r.pass) << r.measured << " " << r.notes;
    EXPECT_EQ(r.name, "uniqueness.nonlinear_u");
}

TEST(Checks, GronwallAndBoundary)
{
    for (const char* e : {"classical", "discounted", "nonlinear_u"}) {
        RunConfig c = coarse(e);
        c.u0 = -1.0;
        const auto f = c.solver().solve(c.x0_point(), c.u0, c.T);
        const auto g = check_gronwall_floor(c, f);
        EXPECT_TRUE(g.pass) << e << " " << g.measured << " vs " << g.threshold;
        const auto b = check_boundary_continuity(c, f);
        EXPECT_TRUE(b.pass) << e << " " << b.measured << " vs " << b.threshold;
    }
}

TEST(Checks, GronwallDetectsAFieldBelowTheFloor)
{
    const RunConfig c = coarse();
    ActionField f = c.solver().solve(c.x0_point(), c.u0, c.T);
    f.at(f.layers(), 3) = -100.0;
    EXPECT_FALSE(check_gronwall_floor(c, f).pass);
}

TEST(Checks, ShortTimeLadderIsMonotoneInEps)
{
    RunConfig c = coarse();
    c.m = 100;
    c.dt = 0.01;
    const auto res = short_time_gaps(c, 3);
    ASSERT_EQ(res.eps.size(), 3u);
    EXPECT_DOUBLE_EQ(res.eps[0], 0.05);
    EXPECT_DOUBLE_EQ(res.eps[2], 0.2);
    for (double g : res.gap) EXPECT_TRUE(std::isfinite(g));
}

TEST(Checks, HerglotzExactOrder)
{
    const auto o = herglotz_exact_order(coarse("nonlinear_u"));
    EXPECT_GT(o.slope, 1.8);
    EXPECT_LT(o.fine, o.coarse);
}

TEST(Checks, WindowOfDpCurves)
{
    EXPECT_EQ(dp_curve_half_window(0.005), 50);
    EXPECT_EQ(dp_curve_half_window(0.02), 13);
    EXPECT_EQ(dp_curve_half_window(1.0), 1);
}

TEST(Checks, MarkovStride)
{
    RunConfig c;
    c.m = 200;
    EXPECT_EQ(markov_stride_for(c), 8);
    c.m = 10;
    EXPECT_EQ(markov_stride_for(c), 1);
    c.markov_stride = 3;
    EXPECT_EQ(markov_stride_for(c), 3);
}
