#pragma once

// Predicted arc costs to per-destination rankings and rank percentiles.
//
// Ranks are 0-based internally (0 = cheapest). Displays use 1-based ranks;
// see display_rank / internal_rank.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "geonet/csv.hpp"
#include "geonet/errors.hpp"
#include "geonet/flowmodel/evaluation.hpp"
#include "geonet/flowmodel/features.hpp"

namespace geonet {

struct ArcCost {
    std::string origin_id;
    std::string dest_id;
    int week = 0;
    double cost = 0.0;
    bool clamped = false;  // the model predicted a negative cost
};

struct CostPredictions {
    std::vector<ArcCost> costs;  // same order as the input arcs
    std::size_t clamped = 0;
};

// One cost per arc from a model trained on Cost-variant features.
template <class Model>
CostPredictions predict_costs(const Model& model, const std::vector<ArcRecord>& arcs, const DomainSignatures& sigs) {
    CostPredictions out;
    out.costs.reserve(arcs.size());
    for (const auto& a : arcs) {
        FeatureVector fv;
        try {
            fv = build_features(a, sigs, FeatureVariant::cost);
        } catch (const std::exception& e) {
            throw std::invalid_argument("arc " + a.origin_id + "->" + a.dest_id + " week " + std::to_string(a.week) +
                                        ": " + e.what());
        }
        const double c = predict(model, std::span<const double>(fv.values));
        ArcCost ac{a.origin_id, a.dest_id, a.week, std::max(c, 0.0), c < 0.0};
        out.clamped += ac.clamped;
        out.costs.push_back(std::move(ac));
    }
    return out;
}

inline double rank_percentile(int rank, int n_fc) {
    if (n_fc < 1 || rank < 0 || rank >= n_fc)
        throw std::out_of_range("rank_percentile: rank " + std::to_string(rank) + " outside [0, " +
                                std::to_string(n_fc) + ")");
    return 1.0 - static_cast<double>(rank + 1) / static_cast<double>(n_fc);
}

inline int display_rank(int rank) { return rank + 1; }
inline int internal_rank(int display) {
    if (display < 1) throw std::out_of_range("display ranks start at 1");
    return display - 1;
}

struct RankingTable {
    std::string dest_id;
    int week = 0;
    std::vector<std::string> order;  // ascending predicted cost
    std::map<std::string, double> predicted_cost;
    std::map<std::string, int> rank;
    std::map<std::string, double> rankpct;

    int n_fc() const { return static_cast<int>(order.size()); }
    int rank_of(const std::string& origin) const {
        auto it = rank.find(origin);
        if (it == rank.end()) throw unknown_id_error("origin", origin);
        return it->second;
    }
    double rankpct_of(const std::string& origin) const {
        auto it = rankpct.find(origin);
        if (it == rankpct.end()) throw unknown_id_error("origin", origin);
        return it->second;
    }
};

struct OriginCost {
    std::string origin_id;
    double cost = 0.0;
};

// Ascending by cost, ties by origin id.
inline RankingTable rank_arcs(const std::string& dest_id, int week, std::vector<OriginCost> costs) {
    if (costs.empty()) throw std::invalid_argument("rank_arcs: no origins for destination '" + dest_id + "'");
    std::set<std::string> seen;
    for (const auto& c : costs) {
        if (!seen.insert(c.origin_id).second)
            throw std::invalid_argument("rank_arcs: duplicate origin '" + c.origin_id + "' for '" + dest_id + "'");
        if (!std::isfinite(c.cost)) throw std::invalid_argument("rank_arcs: non-finite cost for '" + c.origin_id + "'");
    }
    std::sort(costs.begin(), costs.end(), [](const OriginCost& a, const OriginCost& b) {
        return a.cost != b.cost ? a.cost < b.cost : a.origin_id < b.origin_id;
    });
    RankingTable t;
    t.dest_id = dest_id;
    t.week = week;
    const int n = static_cast<int>(costs.size());
    for (int r = 0; r < n; ++r) {
        const auto& c = costs[static_cast<std::size_t>(r)];
        t.order.push_back(c.origin_id);
        t.predicted_cost[c.origin_id] = c.cost;
        t.rank[c.origin_id] = r;
        t.rankpct[c.origin_id] = rank_percentile(r, n);
    }
    return t;
}

// Groups predictions of one week by destination; keyed by dest id.
inline std::map<std::string, RankingTable> rank_all(const std::vector<ArcCost>& costs, int week) {
    std::map<std::string, std::vector<OriginCost>> by_dest;
    for (const auto& c : costs)
        if (c.week == week) by_dest[c.dest_id].push_back({c.origin_id, c.cost});
    std::map<std::string, RankingTable> out;
    for (auto& [dest, v] : by_dest) out.emplace(dest, rank_arcs(dest, week, std::move(v)));
    return out;
}

inline constexpr const char* kRankingHeader = "dest_id,week,rank,origin_id,predicted_cost,rankpct";

inline void write_rankings_csv(std::ostream& out, const std::map<std::string, RankingTable>& tables) {
    out << kRankingHeader << '\n';
    out.precision(17);
    for (const auto& [dest, t] : tables)
        for (const auto& o : t.order)
            out << dest << ',' << t.week << ',' << t.rank.at(o) << ',' << o << ',' << t.predicted_cost.at(o) << ','
                << t.rankpct.at(o) << '\n';
}

// Rebuilds tables from a ranking CSV; ranks are re-derived from the costs and
// must agree with the file.
inline std::map<std::string, RankingTable> read_rankings_csv(std::istream& in) {
    struct Row {
        int week;
        int rank;
        std::size_t line;
    };
    std::map<std::string, std::vector<OriginCost>> costs;
    std::map<std::string, std::map<std::string, Row>> rows;
    csv::read(in, csv::split(kRankingHeader), [&](const std::vector<std::string>& f, std::size_t line) {
        const double cost = csv::to_double(f[4], line, "predicted_cost");
        costs[f[0]].push_back({f[3], cost});
        if (!rows[f[0]].emplace(f[3], Row{static_cast<int>(csv::to_int(f[1], line, "week")), static_cast<int>(csv::to_int(f[2], line, "rank")), line}).second)
            throw data_error("duplicate origin '" + f[3] + "' for destination '" + f[0] + "'", line);
    });
    std::map<std::string, RankingTable> out;
    for (auto& [dest, v] : costs) {
        const auto& dest_rows = rows.at(dest);
        const int week = dest_rows.begin()->second.week;
        auto t = rank_arcs(dest, week, std::move(v));
        for (const auto& [origin, r] : dest_rows) {
            if (r.week != week) throw data_error("mixed weeks for destination '" + dest + "'", r.line);
            if (t.rank.at(origin) != r.rank) throw data_error("rank does not match predicted cost order", r.line);
        }
        out.emplace(dest, std::move(t));
    }
    return out;
}

}  // namespace geonet
