#pragma once

// Geographic node sets and their discretized polar flow images.
//
// A PolarMatrix is the flow landscape of a NodeSet as seen from one origin
// node: rows are direction bins (counter-clockwise from East), columns are
// distance rings. Bins are half-open, so a node exactly on a boundary belongs
// to the bin above it.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"

namespace geonet {

inline constexpr double kMilesPerDegree = 69.0;

struct GeoNode {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    double measure = 0.0;
};

inline void validate(const GeoNode& node) {
    if (!std::isfinite(node.lat) || node.lat < -90.0 || node.lat > 90.0)
        throw std::invalid_argument("node '" + node.id + "': latitude out of range");
    if (!std::isfinite(node.lon) || node.lon < -180.0 || node.lon > 180.0)
        throw std::invalid_argument("node '" + node.id + "': longitude out of range");
    if (!std::isfinite(node.measure) || node.measure < 0.0)
        throw std::invalid_argument("node '" + node.id + "': measure must be nonnegative");
}

enum class NodeKind { fc, zip3, destination, other };

struct NodeSet {
    std::vector<GeoNode> nodes;
    NodeKind kind = NodeKind::other;

    const GeoNode* find(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }

    double total_measure() const {
        double s = 0.0;
        for (const auto& n : nodes) s += n.measure;
        return s;
    }
};

inline void validate(const NodeSet& set) {
    std::unordered_set<std::string> seen;
    for (const auto& n : set.nodes) {
        validate(n);
        if (!seen.insert(n.id).second) throw std::invalid_argument("duplicate node id '" + n.id + "'");
    }
}

enum class DistanceUnit { degrees, miles };

struct PolarGrid {
    int theta_bins = 4;
    int r_bins = 17;
    double r_step = 100.0;
    DistanceUnit r_unit = DistanceUnit::miles;

    // Four directions (NE, NW, SW, SE) by seventeen 100-mile rings.
    static PolarGrid us_preset() { return {}; }

    double theta_width() const { return 2.0 * std::numbers::pi / theta_bins; }

    // Distance in the grid's unit for a planar lat-lon distance in degrees.
    double to_grid_units(double r_degrees) const {
        return r_unit == DistanceUnit::miles ? r_degrees * kMilesPerDegree : r_degrees;
    }

    bool operator==(const PolarGrid&) const = default;
};

inline void validate(const PolarGrid& g) {
    if (g.theta_bins < 1 || g.r_bins < 1 || !(g.r_step > 0.0) || !std::isfinite(g.r_step))
        throw std::invalid_argument("polar grid needs theta_bins >= 1, r_bins >= 1, r_step > 0");
}

using RealMatrix = Eigen::MatrixXd;

struct PolarMatrix {
    RealMatrix values;  // theta_bins x r_bins
    std::string origin_id;
    PolarGrid grid;
};

struct PolarCoord {
    double r = 0.0;      // degrees
    double theta = 0.0;  // radians in [0, 2pi)
};

// Planar offset of `node` from `origin` in lat-lon degrees. theta starts due
// East and turns counter-clockwise; a coincident node reports theta = 0.
inline PolarCoord to_polar(const GeoNode& origin, const GeoNode& node) {
    const double dlat = node.lat - origin.lat;
    const double dlon = node.lon - origin.lon;
    PolarCoord p;
    p.r = std::hypot(dlat, dlon);
    if (p.r == 0.0) return p;
    double theta = std::atan2(dlat, dlon);
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
    p.theta = theta;
    return p;
}

// (row, column) bin of a polar coordinate, or {-1, -1} when beyond the last ring.
inline std::pair<int, int> polar_bin(const PolarCoord& p, const PolarGrid& grid) {
    const double r = grid.to_grid_units(p.r);
    const double col = std::floor(r / grid.r_step);
    if (col >= grid.r_bins) return {-1, -1};
    int row = static_cast<int>(std::floor(p.theta / grid.theta_width()));
    if (row >= grid.theta_bins) row = grid.theta_bins - 1;
    return {row, static_cast<int>(col)};
}

inline PolarMatrix polar_matrix(const GeoNode& origin, const NodeSet& set, const PolarGrid& grid) {
    validate(grid);
    validate(origin);
    PolarMatrix out{RealMatrix::Zero(grid.theta_bins, grid.r_bins), origin.id, grid};
    for (const auto& node : set.nodes) {
        auto [row, col] = polar_bin(to_polar(origin, node), grid);
        if (row < 0) continue;
        out.values(row, col) += node.measure;
    }
    return out;
}

// NodeSet CSV: `id,lat,lon,measure`.
inline NodeSet read_nodes_csv(std::istream& in, NodeKind kind = NodeKind::other) {
    NodeSet set;
    set.kind = kind;
    std::unordered_set<std::string> seen;
    csv::read(in, {"id", "lat", "lon", "measure"}, [&](const std::vector<std::string>& f, std::size_t line) {
        GeoNode n{f[0], csv::to_double(f[1], line, "lat"), csv::to_double(f[2], line, "lon"),
                  csv::to_double(f[3], line, "measure")};
        try {
            validate(n);
        } catch (const std::invalid_argument& e) {
            throw data_error(e.what(), line);
        }
        if (!seen.insert(n.id).second) throw data_error("duplicate node id '" + n.id + "'", line);
        set.nodes.push_back(std::move(n));
    });
    return set;
}

inline NodeSet read_nodes_csv(const std::string& path, NodeKind kind = NodeKind::other) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    return read_nodes_csv(in, kind);
}

inline void write_nodes_csv(std::ostream& out, const NodeSet& set) {
    out << "id,lat,lon,measure\n";
    out.precision(17);
    for (const auto& n : set.nodes) out << n.id << ',' << n.lat << ',' << n.lon << ',' << n.measure << '\n';
}

}  // namespace geonet
