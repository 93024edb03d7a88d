#pragma once

// Hypothetical hub insertion: rewrite a share of the rows whose origin lies
// south-west of the hub so their SW signature points at the hub.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "geonet/flowmodel/features.hpp"

namespace geonet {

inline constexpr int kSouthWest = 2;  // direction rows: NE, NW, SW, SE

struct HubConfig {
    double sw_max_mean = 800.0;
    std::optional<double> sw_max_sd;        // default: 10% of the mean
    std::optional<double> distance_mean;    // degrees; default: dataset mean arc distance
    std::optional<double> distance_sd;      // default: 10% of the distance mean
    PolarGrid grid = PolarGrid::us_preset();  // ring width used to count segments to the hub
    std::uint64_t seed = 0;
};

struct HubResult {
    Dataset data;
    std::vector<std::size_t> modified_rows;  // ascending
    std::size_t eligible = 0;
    bool exhausted = false;  // fewer eligible rows than requested; all of them were replaced
};

inline bool south_west_of(const ArcRecord& arc, const GeoNode& hub) {
    return arc.origin_lat < hub.lat && arc.origin_lon < hub.lon;
}

// Whole rings between origin and hub, capped at the last ring.
inline int segments_to_hub(const ArcRecord& arc, const GeoNode& hub, const PolarGrid& grid) {
    const double r = grid.to_grid_units(std::hypot(hub.lat - arc.origin_lat, hub.lon - arc.origin_lon));
    return std::min(grid.r_bins - 1, static_cast<int>(std::floor(r / grid.r_step)));
}

inline HubResult hub_experiment(const Dataset& test, const GeoNode& hub, double fraction, const HubConfig& cfg = {}) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("hub_experiment: fraction must be in [0, 1]");
    if (test.variant != FeatureVariant::d) throw std::invalid_argument("hub_experiment: needs a model D dataset");
    validate(hub);

    HubResult out;
    out.data = test;
    const auto n = static_cast<std::size_t>(test.x.rows());
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < n; ++i)
        if (south_west_of(test.rows[i], hub)) eligible.push_back(i);
    out.eligible = eligible.size();

    const auto wanted = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (wanted == 0) return out;
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    if (wanted > eligible.size()) out.exhausted = true;
    eligible.resize(std::min(wanted, eligible.size()));
    std::sort(eligible.begin(), eligible.end());
    out.modified_rows = eligible;

    double mean_distance = 0.0;
    for (const auto& r : test.rows) mean_distance += r.distance();
    mean_distance /= static_cast<double>(std::max<std::size_t>(1, n));
    const double d_mean = cfg.distance_mean.value_or(mean_distance);
    const double d_sd = cfg.distance_sd.value_or(0.1 * d_mean);
    const double m_sd = cfg.sw_max_sd.value_or(0.1 * cfg.sw_max_mean);
    std::normal_distribution<double> sw_max(cfg.sw_max_mean, m_sd);
    std::normal_distribution<double> distance(d_mean, d_sd);

    const Eigen::RowVectorXd column_means = test.x.colwise().mean();
    const int ln_col = test.column("ln_lld");
    const int sw_max_col = test.column(direction_max_name(kSouthWest));
    const int sw_ring_col = test.column(direction_ring_name(kSouthWest));
    for (std::size_t i : out.modified_rows) {
        const auto row = static_cast<Eigen::Index>(i);
        out.data.x.row(row) = column_means;
        out.data.x(row, sw_max_col) = std::max(0.0, sw_max(rng));
        out.data.x(row, ln_col) = std::log(std::max(distance(rng), kLogDistanceEpsilon));
        out.data.x(row, sw_ring_col) = segments_to_hub(test.rows[i], hub, cfg.grid);
    }
    return out;
}

}  // namespace geonet
