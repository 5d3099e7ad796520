#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "contact_action/torus.hpp"

using namespace contact_action;

TEST(Wrap, ReducesModOne)
{
    EXPECT_DOUBLE_EQ(TorusPoint{0.25}[0], 0.25);
    EXPECT_DOUBLE_EQ(TorusPoint{1.75}[0], 0.75);
    EXPECT_DOUBLE_EQ(TorusPoint{-0.1}[0], 0.9);
    EXPECT_DOUBLE_EQ(TorusPoint{3.0}[0], 0.0);
}

TEST(Wrap, StaysInHalfOpenInterval)
{
    // just below an integer, x - floor(x) can round to 1
    const double x = -1e-17;
    const double w = wrap_coordinate(x);
    EXPECT_GE(w, 0.0);
    EXPECT_LT(w, 1.0);
}

TEST(Wrap, RejectsNonFinite)
{
    EXPECT_THROW(wrap_coordinate(std::numeric_limits<double>::quiet_NaN()), Error);
    EXPECT_THROW(TorusPoint({std::numeric_limits<double>::infinity(), 0.0}), Error);
    try {
        wrap_coordinate(INFINITY);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    }
}

TEST(Displacement, ShortestRepresentative)
{
    EXPECT_NEAR(displacement(TorusPoint{0.1}, TorusPoint{0.2})[0], 0.1, 1e-15);
    EXPECT_NEAR(displacement(TorusPoint{0.9}, TorusPoint{0.1})[0], 0.2, 1e-15);
    // the tie at 1/2 goes to -1/2
    EXPECT_DOUBLE_EQ(displacement(TorusPoint{0.0}, TorusPoint{0.5})[0], -0.5);
}

TEST(Displacement, DimensionMismatch)
{
    EXPECT_THROW(displacement(TorusPoint{0.1}, TorusPoint{0.1, 0.2}), Error);
    EXPECT_THROW(translate(TorusPoint{0.1}, FiberVector{0.1, 0.2}), Error);
}

TEST(Distance, Examples)
{
    EXPECT_EQ(distance(TorusPoint{0.1}, TorusPoint{0.1}), 0.0);
    EXPECT_NEAR(distance(TorusPoint{0.9}, TorusPoint{0.1}), 0.2, 1e-15);
    EXPECT_DOUBLE_EQ(distance(TorusPoint{0.0, 0.0}, TorusPoint{0.5, 0.5}), 0.7071067811865476);
}

TEST(Distance, MetricAxiomsOnLattice)
{
    std::vector<TorusPoint> pts;
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) pts.push_back(TorusPoint{0.13 * i, 0.29 * j - 0.4});
    }
    for (const auto& a : pts) {
        for (const auto& b : pts) {
            EXPECT_NEAR(distance(a, b), distance(b, a), 1e-15);
            EXPECT_LE(distance(a, b), torus_diameter(2) + 1e-15);
            for (std::size_t k = 0; k < pts.size(); k += 5) {
                EXPECT_LE(distance(a, b), distance(a, pts[k]) + distance(pts[k], b) + 1e-14);
            }
        }
    }
}

TEST(Translate, RoundTripWithDisplacement)
{
    const TorusPoint a{0.8, 0.05};
    const FiberVector d{0.35, -0.2};
    const TorusPoint b = translate(a, d);
    EXPECT_NEAR(b[0], 0.15, 1e-15);
    EXPECT_NEAR(b[1], 0.85, 1e-15);
    const FiberVector back = displacement(a, b);
    EXPECT_NEAR(back[0], d[0], 1e-15);
    EXPECT_NEAR(back[1], d[1], 1e-15);
}

TEST(Midpoint, CrossesZeroTheShortWay)
{
    EXPECT_NEAR(midpoint(TorusPoint{0.9}, TorusPoint{0.1})[0], 0.0, 1e-15);
    EXPECT_NEAR(midpoint(TorusPoint{0.2}, TorusPoint{0.4})[0], 0.3, 1e-15);
}

TEST(FiberVector, Algebra)
{
    const FiberVector a{1.0, 2.0};
    const FiberVector b{0.5, -1.0};
    EXPECT_EQ(a + b, (FiberVector{1.5, 1.0}));
    EXPECT_EQ(a - b, (FiberVector{0.5, 3.0}));
    EXPECT_EQ(2.0 * b, (FiberVector{1.0, -2.0}));
    EXPECT_DOUBLE_EQ(dot(a, b), -1.5);
    EXPECT_DOUBLE_EQ(FiberVector({3.0, 4.0}).norm(), 5.0);
    EXPECT_THROW(FiberVector(3), Error);
}
