#pragma once

// Feature engineering for flow and cost models.
//
// Three signature domains are used, each a table of per-node spectra:
//   oO  origin FC seen against all origin FCs
//   oD  origin FC seen against all destinations
//   dD  destination seen against all destinations
// Every table entry holds the mask-1 compression summary (raw coefficients)
// and the mask-2 geosig (direction max/ring pairs).

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geonet/flowmodel/arcs.hpp"
#include "geonet/spectra.hpp"

namespace geonet {

struct NodeSignature {
    CompressionSummary summary;
    Geosig geosig;
};

struct SignatureTable {
    std::string domain;  // "oO", "oD" or "dD"
    std::map<std::string, NodeSignature> nodes;

    const NodeSignature& at(const std::string& id) const {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw std::out_of_range("no " + domain + " signature for node '" + id + "'");
        return it->second;
    }
};

struct SignatureConfig {
    PolarGrid grid = PolarGrid::us_preset();
    int summary_mask_max = 1;
    GeosigOptions geosig;  // mask_max 2, max pairs
};

inline SignatureTable signature_table(std::string domain, const NodeSet& subjects, const NodeSet& reference,
                                      const SignatureConfig& cfg = {}) {
    SignatureTable table;
    table.domain = std::move(domain);
    for (const auto& node : subjects.nodes) {
        auto spectrum = fft2d(polar_matrix(node, reference, cfg.grid));
        NodeSignature sig;
        sig.summary = compression_summary(spectrum, cfg.summary_mask_max);
        sig.geosig = geosig_from_magnitude(magnitude_spectrum(triangular_mask(spectrum, cfg.geosig.mask_max)), cfg.geosig);
        table.nodes.emplace(node.id, std::move(sig));
    }
    return table;
}

struct DomainSignatures {
    std::optional<SignatureTable> origin_origin;  // oO
    std::optional<SignatureTable> origin_dest;    // oD
    std::optional<SignatureTable> dest_dest;      // dD
};

inline DomainSignatures domain_signatures(const NetworkNodes& nodes, const SignatureConfig& cfg = {}) {
    DomainSignatures s;
    s.origin_origin = signature_table("oO", nodes.origins, nodes.origins, cfg);
    s.origin_dest = signature_table("oD", nodes.origins, nodes.destinations, cfg);
    s.dest_dest = signature_table("dD", nodes.destinations, nodes.destinations, cfg);
    return s;
}

enum class FeatureVariant { null_model, a, b, c, d, cost };

inline const char* to_string(FeatureVariant v) {
    switch (v) {
        case FeatureVariant::null_model: return "null";
        case FeatureVariant::a: return "a";
        case FeatureVariant::b: return "b";
        case FeatureVariant::c: return "c";
        case FeatureVariant::d: return "d";
        case FeatureVariant::cost: return "cost";
    }
    return "?";
}

inline FeatureVariant parse_variant(const std::string& s) {
    if (s == "null") return FeatureVariant::null_model;
    if (s == "a" || s == "A") return FeatureVariant::a;
    if (s == "b" || s == "B") return FeatureVariant::b;
    if (s == "c" || s == "C") return FeatureVariant::c;
    if (s == "d" || s == "D") return FeatureVariant::d;
    if (s == "cost") return FeatureVariant::cost;
    throw std::invalid_argument("unknown feature variant '" + s + "'");
}

inline constexpr double kLogDistanceEpsilon = 1e-6;
inline constexpr int kDirections = 4;

inline std::string direction_max_name(int k) { return "oD_" + std::to_string(k) + "r_summary_max"; }
inline std::string direction_ring_name(int k) { return "oD_" + std::to_string(k) + "r_summary_max_r"; }

namespace detail {

// Raw coefficient columns of the Model A list, in its printed order.
struct RawCoefficient {
    const char* name;
    char table;  // 'o' = oO, 'x' = oD, 'd' = dD
    bool imaginary;
    int row, col;
};

inline const std::vector<RawCoefficient>& model_a_columns() {
    static const std::vector<RawCoefficient> cols{
        {"dDI_01", 'd', true, 0, 1},  {"dDI_10", 'd', true, 1, 0},  {"dDR_00", 'd', false, 0, 0},
        {"dDR_01", 'd', false, 0, 1}, {"dDR_10", 'd', false, 1, 0}, {"oOI_01", 'o', true, 0, 1},
        {"oOI_10", 'o', true, 1, 0},  {"oOR_01", 'o', false, 0, 1}, {"oOR_10", 'o', false, 1, 0},
        {"oDI_01", 'x', true, 0, 1},  {"oDI_10", 'x', true, 1, 0},  {"oDR_01", 'x', false, 0, 1},
        {"oDR_10", 'x', false, 1, 0}, {"oDR_00", 'x', false, 0, 0},
    };
    return cols;
}

inline const SignatureTable& require(const std::optional<SignatureTable>& t, const char* domain) {
    if (!t) throw std::invalid_argument(std::string("missing geosig table for domain ") + domain);
    return *t;
}

inline double coefficient(const NodeSignature& s, bool imaginary, int row, int col) {
    const auto* c = s.summary.at(row, col);
    if (!c) throw std::invalid_argument("compression summary lacks coefficient (" + std::to_string(row) + "," +
                                        std::to_string(col) + ")");
    return imaginary ? c->im : c->re;
}

inline double ln_lld(double distance) {
    return std::log(distance > 0.0 ? distance : distance + kLogDistanceEpsilon);
}

}  // namespace detail

inline std::vector<std::string> feature_names(FeatureVariant v) {
    std::vector<std::string> names;
    if (v == FeatureVariant::cost) {
        names = {"t", "direct", "f", "d", "lat", "lon"};
        for (int k = 0; k < kDirections; ++k) {
            names.push_back(direction_max_name(k));
            names.push_back(direction_ring_name(k));
        }
        return names;
    }
    names.push_back("ln_lld");
    switch (v) {
        case FeatureVariant::a:
            for (const auto& c : detail::model_a_columns()) names.emplace_back(c.name);
            break;
        case FeatureVariant::b:
            names.insert(names.end(), {"oO_00", "oD_00", "dD_00"});
            break;
        case FeatureVariant::c:
            for (int k = 0; k < kDirections; ++k) names.push_back(direction_max_name(k));
            break;
        case FeatureVariant::d:
            for (int k = 0; k < kDirections; ++k) {
                names.push_back(direction_max_name(k));
                names.push_back(direction_ring_name(k));
            }
            break;
        default:
            break;
    }
    return names;
}

struct FeatureVector {
    FeatureVariant variant = FeatureVariant::null_model;
    std::vector<double> values;
    std::vector<std::string> names;
};

inline FeatureVector build_features(const ArcRecord& arc, const DomainSignatures& sigs, FeatureVariant variant) {
    FeatureVector fv;
    fv.variant = variant;
    fv.names = feature_names(variant);
    auto& x = fv.values;
    const double d = arc.distance();

    auto push_direction_pairs = [&](bool with_rings) {
        const auto& sig = detail::require(sigs.origin_dest, "oD").at(arc.origin_id);
        if (static_cast<int>(sig.geosig.peaks.size()) != kDirections)
            throw std::invalid_argument("oD geosig must have 4 directions");
        for (const auto& p : sig.geosig.peaks) {
            x.push_back(p.value);
            if (with_rings) x.push_back(static_cast<double>(p.r_bin));
        }
    };

    if (variant == FeatureVariant::cost) {
        x = {static_cast<double>(arc.week), static_cast<double>(arc.direct), arc.packages, d, arc.origin_lat,
             arc.origin_lon};
        push_direction_pairs(true);
        return fv;
    }

    x.push_back(detail::ln_lld(d));
    switch (variant) {
        case FeatureVariant::a: {
            const auto& oo = detail::require(sigs.origin_origin, "oO").at(arc.origin_id);
            const auto& od = detail::require(sigs.origin_dest, "oD").at(arc.origin_id);
            const auto& dd = detail::require(sigs.dest_dest, "dD").at(arc.dest_id);
            for (const auto& c : detail::model_a_columns()) {
                const auto& s = c.table == 'o' ? oo : c.table == 'x' ? od : dd;
                x.push_back(detail::coefficient(s, c.imaginary, c.row, c.col));
            }
            break;
        }
        case FeatureVariant::b: {
            const auto& oo = detail::require(sigs.origin_origin, "oO").at(arc.origin_id);
            const auto& od = detail::require(sigs.origin_dest, "oD").at(arc.origin_id);
            const auto& dd = detail::require(sigs.dest_dest, "dD").at(arc.dest_id);
            for (const auto* s : {&oo, &od, &dd})
                x.push_back(power(detail::coefficient(*s, false, 0, 0), detail::coefficient(*s, true, 0, 0)));
            break;
        }
        case FeatureVariant::c:
            push_direction_pairs(false);
            break;
        case FeatureVariant::d:
            push_direction_pairs(true);
            break;
        default:
            break;
    }
    return fv;
}

enum class Target { packages, cost_per_pkg };

// Design matrix plus the records each row came from.
struct Dataset {
    FeatureVariant variant = FeatureVariant::null_model;
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<ArcRecord> rows;

    int column(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return static_cast<int>(k);
        throw std::invalid_argument("dataset has no feature '" + name + "'");
    }
};

inline Dataset build_dataset(const std::vector<ArcRecord>& arcs, const DomainSignatures& sigs, FeatureVariant variant,
                             Target target = Target::packages) {
    Dataset ds;
    ds.variant = variant;
    ds.names = feature_names(variant);
    ds.x.resize(static_cast<Eigen::Index>(arcs.size()), static_cast<Eigen::Index>(ds.names.size()));
    ds.y.resize(static_cast<Eigen::Index>(arcs.size()));
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        FeatureVector fv;
        try {
            fv = build_features(arcs[i], sigs, variant);
        } catch (const std::exception& e) {
            throw std::invalid_argument("arc " + arcs[i].origin_id + "->" + arcs[i].dest_id + " week " +
                                        std::to_string(arcs[i].week) + ": " + e.what());
        }
        for (std::size_t k = 0; k < fv.values.size(); ++k)
            ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = fv.values[k];
        ds.y(static_cast<Eigen::Index>(i)) = target == Target::packages ? arcs[i].packages : arcs[i].cost_per_pkg;
    }
    ds.rows = arcs;
    return ds;
}

}  // namespace geonet
