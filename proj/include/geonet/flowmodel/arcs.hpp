#pragma once

// Origin -> destination observations and the node sets implied by them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geonet/csv.hpp"
#include "geonet/geo_core.hpp"

namespace geonet {

struct ArcRecord {
    int week = 0;
    std::string origin_id;
    std::string dest_id;
    double packages = 0.0;
    double cost_per_pkg = 0.0;
    int direct = 0;
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double dest_lat = 0.0;
    double dest_lon = 0.0;

    // Planar lat-lon distance in degrees.
    double distance() const { return std::hypot(dest_lat - origin_lat, dest_lon - origin_lon); }
};

inline const std::vector<std::string>& arc_csv_header() {
    static const std::vector<std::string> header{"week",   "origin_id",  "dest_id",    "packages", "cost_per_pkg",
                                                 "direct", "origin_lat", "origin_lon", "dest_lat", "dest_lon"};
    return header;
}

inline void validate(const ArcRecord& a) {
    if (!(a.packages >= 0.0)) throw std::invalid_argument("arc flow must be nonnegative");
    if (!(a.cost_per_pkg >= 0.0)) throw std::invalid_argument("arc cost must be nonnegative");
    if (a.direct != 0 && a.direct != 1) throw std::invalid_argument("direct must be 0 or 1");
    validate(GeoNode{a.origin_id, a.origin_lat, a.origin_lon, 0.0});
    validate(GeoNode{a.dest_id, a.dest_lat, a.dest_lon, 0.0});
}

inline std::vector<ArcRecord> read_arcs_csv(std::istream& in) {
    std::vector<ArcRecord> arcs;
    csv::read(in, arc_csv_header(), [&](const std::vector<std::string>& f, std::size_t line) {
        ArcRecord a;
        a.week = static_cast<int>(csv::to_int(f[0], line, "week"));
        a.origin_id = f[1];
        a.dest_id = f[2];
        a.packages = csv::to_double(f[3], line, "packages");
        a.cost_per_pkg = csv::to_double(f[4], line, "cost_per_pkg");
        a.direct = static_cast<int>(csv::to_int(f[5], line, "direct"));
        a.origin_lat = csv::to_double(f[6], line, "origin_lat");
        a.origin_lon = csv::to_double(f[7], line, "origin_lon");
        a.dest_lat = csv::to_double(f[8], line, "dest_lat");
        a.dest_lon = csv::to_double(f[9], line, "dest_lon");
        if (a.origin_id.empty() || a.dest_id.empty()) throw data_error("empty node id", line);
        try {
            validate(a);
        } catch (const std::invalid_argument& e) {
            throw data_error(e.what(), line);
        }
        arcs.push_back(std::move(a));
    });
    return arcs;
}

inline std::vector<ArcRecord> read_arcs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    return read_arcs_csv(in);
}

inline void write_arcs_csv(std::ostream& out, const std::vector<ArcRecord>& arcs) {
    const auto& h = arc_csv_header();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    const auto old = out.precision(17);
    for (const auto& a : arcs) {
        out << a.week << ',' << a.origin_id << ',' << a.dest_id << ',' << a.packages << ',' << a.cost_per_pkg << ','
            << a.direct << ',' << a.origin_lat << ',' << a.origin_lon << ',' << a.dest_lat << ',' << a.dest_lon
            << '\n';
    }
    out.precision(old);
}

inline std::vector<ArcRecord> arcs_in_week(const std::vector<ArcRecord>& arcs, int week) {
    std::vector<ArcRecord> out;
    std::copy_if(arcs.begin(), arcs.end(), std::back_inserter(out), [&](const ArcRecord& a) { return a.week == week; });
    return out;
}

struct NetworkNodes {
    NodeSet origins;       // measure = total outbound packages
    NodeSet destinations;  // measure = total inbound packages
};

// Origin and destination node sets with measures equal to total flow over `arcs`.
// Node order is by id so results do not depend on row order.
inline NetworkNodes nodes_from_arcs(const std::vector<ArcRecord>& arcs) {
    std::map<std::string, GeoNode> origins, dests;
    for (const auto& a : arcs) {
        auto oit = origins.try_emplace(a.origin_id, GeoNode{a.origin_id, a.origin_lat, a.origin_lon, 0.0}).first;
        auto dit = dests.try_emplace(a.dest_id, GeoNode{a.dest_id, a.dest_lat, a.dest_lon, 0.0}).first;
        oit->second.measure += a.packages;
        dit->second.measure += a.packages;
    }
    NetworkNodes out;
    out.origins.kind = NodeKind::fc;
    out.destinations.kind = NodeKind::destination;
    for (auto& [id, n] : origins) out.origins.nodes.push_back(n);
    for (auto& [id, n] : dests) out.destinations.nodes.push_back(n);
    return out;
}

}  // namespace geonet
