#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "geonet/geo_core.hpp"

using namespace geonet;

namespace {

constexpr double kPi = std::numbers::pi;

GeoNode at(double lat, double lon, double f = 1.0, std::string id = "n") { return {std::move(id), lat, lon, f}; }

PolarGrid degree_grid() { return {4, 17, 1.0, DistanceUnit::degrees}; }

NodeSet random_set(std::mt19937_64& rng, int n, double spread) {
    std::uniform_real_distribution<double> off(-spread, spread);
    std::uniform_real_distribution<double> f(0.0, 50.0);
    NodeSet set;
    for (int i = 0; i < n; ++i) set.nodes.push_back(at(40.0 + off(rng), -95.0 + off(rng), f(rng), "v" + std::to_string(i)));
    return set;
}

}  // namespace

TEST(ToPolar, CardinalOffsets) {
    const auto o = at(0.0, 0.0);
    auto east = to_polar(o, at(0.0, 1.0));
    EXPECT_DOUBLE_EQ(east.r, 1.0);
    EXPECT_DOUBLE_EQ(east.theta, 0.0);

    auto north = to_polar(o, at(1.0, 0.0));
    EXPECT_DOUBLE_EQ(north.r, 1.0);
    EXPECT_DOUBLE_EQ(north.theta, kPi / 2);

    auto sw = to_polar(o, at(-1.0, -1.0));
    EXPECT_DOUBLE_EQ(sw.r, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(sw.theta, 5 * kPi / 4);

    auto west = to_polar(o, at(0.0, -1.0));
    EXPECT_DOUBLE_EQ(west.theta, kPi);
    auto south = to_polar(o, at(-1.0, 0.0));
    EXPECT_DOUBLE_EQ(south.theta, 3 * kPi / 2);
}

TEST(ToPolar, CoincidentNodeHasZeroAngle) {
    auto p = to_polar(at(10, 10), at(10, 10));
    EXPECT_EQ(p.r, 0.0);
    EXPECT_EQ(p.theta, 0.0);
}

TEST(ToPolar, ThetaNeverReachesTwoPi) {
    const auto o = at(0.0, 0.0);
    // Tiny negative latitude offsets push atan2 toward -0, i.e. 2pi after wrapping.
    for (double dlat : {-1e-300, -1e-17, -1e-12, -0.0}) {
        auto p = to_polar(o, at(dlat, 1.0));
        EXPECT_GE(p.theta, 0.0);
        EXPECT_LT(p.theta, 2 * kPi);
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 10000; ++i) {
        auto p = to_polar(o, at(u(rng), u(rng)));
        ASSERT_GE(p.theta, 0.0);
        ASSERT_LT(p.theta, 2 * kPi);
    }
}

TEST(PolarMatrix, SingleNodeDueEast) {
    NodeSet set{{at(0.0, 0.5, 7.0)}};
    auto p = polar_matrix(at(0, 0), set, degree_grid());
    ASSERT_EQ(p.values.rows(), 4);
    ASSERT_EQ(p.values.cols(), 17);
    EXPECT_EQ(p.values(0, 0), 7.0);
    EXPECT_EQ(p.values.sum(), 7.0);
}

TEST(PolarMatrix, NorthBoundaryLandsInSecondRow) {
    NodeSet set{{at(1.5, 0.0, 3.0)}};
    auto p = polar_matrix(at(0, 0), set, degree_grid());
    EXPECT_EQ(p.values(1, 1), 3.0);
    EXPECT_EQ(p.values.sum(), 3.0);
}

TEST(PolarMatrix, CoincidentNodeKeepsMass) {
    NodeSet set{{at(5, 5, 2.5, "self")}};
    auto p = polar_matrix(at(5, 5, 0.0, "self"), set, degree_grid());
    EXPECT_EQ(p.values(0, 0), 2.5);
}

TEST(PolarMatrix, EmptySetIsZero) {
    auto p = polar_matrix(at(0, 0), NodeSet{}, PolarGrid::us_preset());
    EXPECT_EQ(p.values.rows(), 4);
    EXPECT_EQ(p.values.cols(), 17);
    EXPECT_EQ(p.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PolarMatrix, OutOfRangeNodesDropped) {
    // 17 rings of 100 miles reach 1700 miles, about 24.6 degrees.
    NodeSet set{{at(0, 20.0, 1.0, "in"), at(0, 30.0, 5.0, "out")}};
    auto p = polar_matrix(at(0, 0), set, PolarGrid::us_preset());
    EXPECT_EQ(p.values.sum(), 1.0);
    EXPECT_EQ(p.values(0, static_cast<int>(std::floor(20.0 * 69.0 / 100.0))), 1.0);
}

TEST(PolarMatrix, MilesUseSixtyNinePerDegree) {
    // 1.45 degrees = 100.05 miles: second ring.
    NodeSet set{{at(1.45, 0.0, 1.0)}};
    auto p = polar_matrix(at(0, 0), set, PolarGrid::us_preset());
    EXPECT_EQ(p.values(1, 1), 1.0);
}

TEST(PolarMatrix, MassConservationProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto set = random_set(rng, 100, 20.0);
        auto origin = at(40.0, -95.0);
        auto grid = PolarGrid::us_preset();
        double expected = 0.0;
        for (const auto& n : set.nodes) {
            const double r = std::hypot(n.lat - origin.lat, n.lon - origin.lon) * 69.0;
            if (r < grid.r_bins * grid.r_step) expected += n.measure;
        }
        auto p = polar_matrix(origin, set, grid);
        ASSERT_NEAR(p.values.sum(), expected, 1e-9 * std::max(1.0, expected));
        ASSERT_GE(p.values.minCoeff(), 0.0);
    }
}

TEST(PolarMatrix, ScalingIsExact) {
    std::mt19937_64 rng(3);
    auto set = random_set(rng, 60, 10.0);
    auto doubled = set;
    for (auto& n : doubled.nodes) n.measure *= 2.0;
    auto origin = at(40.0, -95.0);
    auto a = polar_matrix(origin, set, PolarGrid::us_preset());
    auto b = polar_matrix(origin, doubled, PolarGrid::us_preset());
    EXPECT_TRUE(b.values == (2.0 * a.values));
}

TEST(PolarMatrix, RotationByOneBinPermutesRows) {
    const int bins = 8;
    PolarGrid grid{bins, 5, 1.0, DistanceUnit::degrees};
    const double width = 2 * kPi / bins;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> row(0, bins - 1), ring(0, 4);
    std::uniform_real_distribution<double> f(0.1, 9.0);
    NodeSet set, rotated;
    for (int i = 0; i < 40; ++i) {
        const int k = row(rng);
        const double r = ring(rng) + 0.5;
        const double th = (k + 0.5) * width;
        const double th2 = th + width;
        const double m = f(rng);
        set.nodes.push_back(at(r * std::sin(th), r * std::cos(th), m, "a" + std::to_string(i)));
        rotated.nodes.push_back(at(r * std::sin(th2), r * std::cos(th2), m, "a" + std::to_string(i)));
    }
    auto p = polar_matrix(at(0, 0), set, grid);
    auto q = polar_matrix(at(0, 0), rotated, grid);
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(q.values((i + 1) % bins, j), p.values(i, j));
}

TEST(NodeValidation, RejectsBadNodes) {
    EXPECT_THROW(validate(at(91, 0)), std::invalid_argument);
    EXPECT_THROW(validate(at(0, -181)), std::invalid_argument);
    EXPECT_THROW(validate(at(0, 0, -1.0)), std::invalid_argument);
    NodeSet dup{{at(0, 0, 1, "x"), at(1, 1, 1, "x")}};
    EXPECT_THROW(validate(dup), std::invalid_argument);
    EXPECT_THROW(polar_matrix(at(0, 0), NodeSet{}, PolarGrid{0, 17, 100.0, DistanceUnit::miles}),
                 std::invalid_argument);
}

TEST(NodeCsv, ReadsAndReportsLineNumbers) {
    std::istringstream good("id,lat,lon,measure\nA,40.5,-100.25,12\nB,30,-90,0\n");
    auto set = read_nodes_csv(good, NodeKind::fc);
    ASSERT_EQ(set.nodes.size(), 2u);
    EXPECT_EQ(set.nodes[0].id, "A");
    EXPECT_DOUBLE_EQ(set.nodes[0].lon, -100.25);
    EXPECT_EQ(set.kind, NodeKind::fc);

    std::istringstream bad("id,lat,lon,measure\nA,40,-100,1\nB,abc,-90,0\n");
    try {
        read_nodes_csv(bad);
        FAIL() << "expected data_error";
    } catch (const data_error& e) {
        EXPECT_EQ(e.line(), 3u);
    }

    std::istringstream header("id,lat,lng,measure\n");
    EXPECT_THROW(read_nodes_csv(header), data_error);
    std::istringstream negative("id,lat,lon,measure\nA,40,-100,-2\n");
    EXPECT_THROW(read_nodes_csv(negative), data_error);
}
