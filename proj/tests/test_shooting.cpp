#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "contact_action/shooting.hpp"

using namespace contact_action;

namespace {

bool has_branch(const std::vector<ShootingBranch>& bs, double p0, double tol)
{
    for (const auto& b : bs) {
        if (b.converged && std::abs(b.p0[0] - p0) < tol) return true;
    }
    return false;
}

} // namespace

TEST(Shoot, FreeParticleBranchesAreTheLifts)
{
    const auto h = catalog::hamiltonian("classical", {{"epsilon", 0.0}});
    const auto bs = shoot(h, TorusPoint{0.0}, 0.0, TorusPoint{0.3}, 1.0);
    for (double p0 : {0.3, -0.7, 1.3}) EXPECT_TRUE(has_branch(bs, p0, 1e-9)) << p0;
    for (const auto& b : bs) {
        // every branch is a lift 0.3 + k within the default radius
        const double k = b.p0[0] - 0.3;
        EXPECT_NEAR(k, std::round(k), 1e-9);
        EXPECT_LE(std::abs(b.p0[0]), default_shooting_radius(h, 1.0));
    }
    const auto best = min_over_solutions(bs);
    EXPECT_NEAR(best.h_value, 0.045, 1e-9);
    EXPECT_NEAR(best.branch.p0[0], 0.3, 1e-9);
}

TEST(Shoot, DiscountedClosedFormBranch)
{
    const double lambda = 0.5, d = 0.3, t = 1.0;
    const auto h = catalog::hamiltonian("discounted", {{"epsilon", 0.0}, {"lambda", lambda}});
    const auto bs = shoot(h, TorusPoint{0.0}, 0.0, TorusPoint{d}, t);
    const double decay = 1.0 - std::exp(-lambda * t);
    for (double dd : {d, d - 1.0, d + 1.0}) EXPECT_TRUE(has_branch(bs, lambda * dd / decay, 1e-8)) << dd;
    const auto best = min_over_solutions(bs);
    EXPECT_NEAR(best.branch.p0[0], lambda * d / decay, 1e-8);
    const double exact = lambda * d * d * std::exp(-lambda * t) / (2.0 * decay);
    EXPECT_NEAR(best.h_value, exact, 1e-6);
    EXPECT_NEAR(best.h_value, 0.03468, 1e-5);
}

TEST(Shoot, TargetAtStartGivesZeroMomentum)
{
    const auto h = catalog::hamiltonian("classical", {{"epsilon", 0.0}});
    const auto bs = shoot(h, TorusPoint{0.4}, 0.0, TorusPoint{0.4}, 0.1);
    EXPECT_TRUE(has_branch(bs, 0.0, 1e-10));
    EXPECT_NEAR(min_over_solutions(bs).h_value, 0.0, 1e-12);
}

TEST(Shoot, TwoDimensionalDiagonal)
{
    const auto h = catalog::hamiltonian("classical", {{"epsilon", 0.0}}, 2);
    ShootingOptions opt;
    opt.multistart = 6;
    const auto best = min_over_solutions(shoot(h, TorusPoint{0.0, 0.0}, 0.0, TorusPoint{0.2, -0.1}, 1.0, opt));
    EXPECT_NEAR(best.h_value, 0.5 * (0.04 + 0.01), 1e-9);
}

TEST(Shoot, TinyRadiusHasNoBranches)
{
    const auto h = catalog::hamiltonian("discounted", {});
    ShootingOptions opt;
    opt.radius = 0.01;
    try {
        shoot(h, TorusPoint{0.0}, 0.0, TorusPoint{0.3}, 1.0, opt);
        FAIL() << "expected no-solution";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::no_solution);
        EXPECT_NE(std::string(e.what()).find("no converged branches"), std::string::npos);
    }
}

TEST(Shoot, ReproducibleAndWorkerInvariant)
{
    const auto h = catalog::hamiltonian("nonlinear_u", {{"epsilon", 0.3}});
    ShootingOptions one;
    one.workers = 1;
    ShootingOptions four;
    four.workers = 4;
    const auto a = shoot(h, TorusPoint{0.0}, 0.0, TorusPoint{0.4}, 1.0, one);
    const auto b = shoot(h, TorusPoint{0.0}, 0.0, TorusPoint{0.4}, 1.0, four);
    std::ostringstream sa, sb;
    write_branches_csv(sa, a);
    write_branches_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "p0_1,x_1,u,residual,converged");
}

TEST(MinOverSolutions, SingleAndEmpty)
{
    ShootingBranch b;
    b.p0 = FiberVector{0.2};
    b.terminal = ContactState{TorusPoint{0.3}, 0.125, FiberVector{0.2}, 1.0};
    b.converged = true;
    EXPECT_EQ(min_over_solutions({b}).h_value, 0.125);
    EXPECT_THROW(min_over_solutions({}), Error);
    b.converged = false;
    EXPECT_THROW(min_over_solutions({b}), Error);
}

TEST(MinOverSolutions, TiesGoToSmallestMomentum)
{
    auto make = [](double p0) {
        ShootingBranch b;
        b.p0 = FiberVector{p0};
        b.terminal = ContactState{TorusPoint{0.5}, 0.125, FiberVector{p0}, 1.0};
        b.converged = true;
        return b;
    };
    EXPECT_EQ(min_over_solutions({make(0.5), make(-0.5)}).branch.p0[0], -0.5);
    EXPECT_EQ(min_over_solutions({make(0.7), make(-0.5)}).branch.p0[0], -0.5);
}
