#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "contact_action/contact_flow.hpp"

using namespace contact_action;

TEST(VectorField, RestPoint)
{
    const auto h = catalog::hamiltonian("discounted", {{"epsilon", 0.0}, {"lambda", 0.5}});
    const auto f = vector_field(h, TorusPoint{0.0}, 0.0, FiberVector{0.0});
    EXPECT_EQ(f.dx[0], 0.0);
    EXPECT_EQ(f.du, 0.0);
    EXPECT_EQ(f.dp[0], 0.0);
}

TEST(VectorField, DiscountedUnitMomentum)
{
    const auto h = catalog::hamiltonian("discounted", {{"epsilon", 0.0}, {"lambda", 0.5}});
    const auto f = vector_field(h, TorusPoint{0.0}, 0.0, FiberVector{1.0});
    EXPECT_DOUBLE_EQ(f.dx[0], 1.0);
    EXPECT_DOUBLE_EQ(f.du, 0.5);
    EXPECT_DOUBLE_EQ(f.dp[0], -0.5);
}

TEST(VectorField, PotentialForce)
{
    const auto h = catalog::hamiltonian("classical", {{"epsilon", 0.3}});
    const auto f = vector_field(h, TorusPoint{0.25}, 7.0, FiberVector{0.0});
    EXPECT_EQ(f.dx[0], 0.0);
    EXPECT_NEAR(f.dp[0], 2.0 * std::numbers::pi * 0.3, 1e-14);
    // -dH/dx by central differences
    const double hh = 1e-6;
    const double fd = -(h.value(TorusPoint{0.25 + hh}, 7.0, FiberVector{0.0}) - h.value(TorusPoint{0.25 - hh}, 7.0, FiberVector{0.0})) / (2 * hh);
    EXPECT_NEAR(f.dp[0], fd, 1e-7);
}

TEST(Integrate, StationaryStepGivesTwoEqualStates)
{
    const auto h = catalog::hamiltonian("classical", {{"epsilon", 0.0}});
    const auto tr = integrate(h, ContactState{TorusPoint{0.4}, 0.0, FiberVector{0.0}, 0.0}, 0.01, 0.01);
    ASSERT_EQ(tr.states.size(), 2u);
    EXPECT_EQ(tr.states[0].x, tr.states[1].x);
    EXPECT_EQ(tr.states[0].p, tr.states[1].p);
    EXPECT_EQ(tr.states[1].u, 0.0);
    EXPECT_DOUBLE_EQ(tr.states[1].t, 0.01);
}

TEST(Integrate, DiscountedMomentumDecaysExponentially)
{
    const auto h = catalog::hamiltonian("discounted", {{"epsilon", 0.0}, {"lambda", 0.5}});
    const auto tr = integrate(h, ContactState{TorusPoint{0.0}, 0.0, FiberVector{1.0}, 0.0}, 1.0, 1e-3);
    EXPECT_NEAR(tr.states.back().p[0], std::exp(-0.5), 1e-8);
    EXPECT_NEAR(tr.states.back().p[0], 0.606531, 1e-6);
    // x(t) = (1 - e^{-lambda t}) / lambda, continuous lift
    EXPECT_NEAR(tr.lifted_end[0], (1.0 - std::exp(-0.5)) / 0.5, 1e-8);
}

TEST(Integrate, EnergyInvariants)
{
    // u-independent: H is conserved. Discounted: dH/dt = -lambda H.
    const auto hc = catalog::hamiltonian("classical", {{"epsilon", 0.3}}, 2);
    const ContactState s0{TorusPoint{0.1, 0.7}, 0.2, FiberVector{0.9, -0.3}, 0.0};
    const auto tc = integrate(hc, s0, 2.0, 1e-3);
    const double e0 = hc.value(s0.x, s0.u, s0.p);
    for (const auto& s : tc.states) EXPECT_NEAR(hc.value(s.x, s.u, s.p), e0, 1e-11);

    const auto hd = catalog::hamiltonian("discounted", {{"epsilon", 0.3}, {"lambda", 0.5}}, 2);
    const auto td = integrate(hd, s0, 2.0, 1e-3);
    const double d0 = hd.value(s0.x, s0.u, s0.p);
    for (const auto& s : td.states) EXPECT_NEAR(hd.value(s.x, s.u, s.p), d0 * std::exp(-0.5 * s.t), 1e-10);
}

TEST(Integrate, FourthOrder)
{
    const auto h = catalog::hamiltonian("nonlinear_u", {{"epsilon", 0.3}, {"a", 0.8}});
    const ContactState s0{TorusPoint{0.05}, 0.3, FiberVector{1.1}, 0.0};
    const auto ref = flow_endpoint(h, s0, 1.0, 1e-4);
    const double e1 = std::abs(flow_endpoint(h, s0, 1.0, 0.04).u - ref.u);
    const double e2 = std::abs(flow_endpoint(h, s0, 1.0, 0.02).u - ref.u);
    EXPECT_GT(std::log2(e1 / e2), 3.6);
}

TEST(Integrate, EndpointMatchesTrajectory)
{
    const auto h = catalog::hamiltonian("nonlinear_u", {{"epsilon", 0.3}});
    const ContactState s0{TorusPoint{0.9}, -0.4, FiberVector{-0.6}, 0.0};
    const auto tr = integrate(h, s0, 0.7, 1e-3);
    const auto end = flow_endpoint(h, s0, 0.7, 1e-3);
    EXPECT_EQ(end.u, tr.states.back().u);
    EXPECT_EQ(end.x, tr.states.back().x);
    EXPECT_DOUBLE_EQ(end.t, 0.7);
}

TEST(Integrate, BlowUpReportsLastState)
{
    // H = |p|^2/2 - u^2: u' = |p|^2/2 + u^2 leaves every bounded set before t = pi/2.
    ContactHamiltonian h = catalog::hamiltonian("classical", {});
    h.value = [](const TorusPoint&, double u, const FiberVector& p) { return 0.5 * p.squared_norm() - u * u; };
    h.d_u = [](const TorusPoint&, double u, const FiberVector&) { return -2.0 * u; };
    try {
        integrate(h, ContactState{TorusPoint{0.0}, 1.0, FiberVector{0.0}, 0.0}, 3.0, 1e-3);
        FAIL() << "expected blow-up";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::blow_up);
        EXPECT_NE(std::string(e.what()).find("u="), std::string::npos);
    }
}

TEST(Integrate, RejectsBadStep)
{
    const auto h = catalog::hamiltonian("classical", {});
    EXPECT_THROW(integrate(h, ContactState{TorusPoint{0.0}, 0.0, FiberVector{0.0}, 0.0}, 1.0, 0.0), Error);
    EXPECT_THROW(integrate(h, ContactState{TorusPoint{0.0}, 0.0, FiberVector{0.0}, 0.0}, 0.001, 0.01), Error);
}

TEST(TrajectoryCsv, HeaderAndRows)
{
    const auto h = catalog::hamiltonian("classical", {}, 2);
    const auto tr = integrate(h, ContactState{TorusPoint{0.0, 0.0}, 0.0, FiberVector{1.0, 0.5}, 0.0}, 0.1, 0.05);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x_1,x_2,u,p_1,p_2,v_1,v_2");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 3);
}
