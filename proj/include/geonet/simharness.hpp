#pragma once

// Synthetic networks, simulated operators and bandit episodes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "geonet/bandit.hpp"
#include "geonet/flowmodel.hpp"
#include "geonet/ranker.hpp"

namespace geonet {

struct Cluster {
    double lat = 0.0;
    double lon = 0.0;
    double spread = 0.0;  // degrees, sd of both coordinates
};

inline std::vector<Cluster> us_clusters() {
    return {{34.0, -118.0, 1.5}, {40.5, -74.5, 1.5}, {41.8, -87.7, 1.5}, {32.8, -96.8, 1.5}, {33.7, -84.4, 1.5},
            {47.6, -122.3, 1.0}, {39.7, -105.0, 1.0}};
}

struct SyntheticNetworkConfig {
    std::uint64_t seed = 1;
    int n_fc = 20;
    int n_dest = 30;
    int weeks = 8;
    std::vector<Cluster> clusters = us_clusters();
    double base_cost = 0.5;       // per package
    double distance_coef = 0.05;  // per package per degree
    double noise_sd = 0.05;       // weekly cost noise
    double mean_demand = 2000.0;  // packages per destination per week
    double distance_decay = 1.5;  // flow share ~ distance^-decay
    double direct_radius = 8.0;   // degrees; closer arcs are direct
};

inline void validate(const SyntheticNetworkConfig& c) {
    if (c.n_fc < 1 || c.n_dest < 1 || c.weeks < 1) throw std::invalid_argument("network config: sizes must be >= 1");
    if (c.clusters.empty()) throw std::invalid_argument("network config: need at least one cluster");
    for (const auto& k : c.clusters)
        if (!(k.spread >= 0.0)) throw std::invalid_argument("network config: negative cluster spread");
    if (!(c.noise_sd >= 0.0) || !(c.mean_demand > 0.0)) throw std::invalid_argument("network config: bad noise or demand");
}

struct SyntheticNetwork {
    SyntheticNetworkConfig config;
    std::vector<GeoNode> fcs;    // measure unused
    std::vector<GeoNode> dests;  // measure = mean weekly demand
    std::vector<ArcRecord> arcs;  // every (week, fc, dest), weeks outermost

    double expected_cost(const ArcRecord& a) const {
        return config.base_cost + config.distance_coef * a.distance();
    }
    // Noise-free cost per destination and origin, the operator's ground truth.
    std::map<std::string, std::map<std::string, double>> true_costs() const {
        std::map<std::string, std::map<std::string, double>> out;
        for (const auto& a : arcs)
            if (a.week == 0) out[a.dest_id][a.origin_id] = expected_cost(a);
        return out;
    }
    std::vector<ArcRecord> week(int w) const {
        std::vector<ArcRecord> out;
        for (const auto& a : arcs)
            if (a.week == w) out.push_back(a);
        return out;
    }
};

inline int id_width(int n) { return std::max(2, static_cast<int>(std::to_string(std::max(0, n - 1)).size())); }

inline SyntheticNetwork generate_network(const SyntheticNetworkConfig& cfg) {
    validate(cfg);
    SyntheticNetwork net;
    net.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, cfg.clusters.size() - 1);
    auto place = [&](const std::string& id) {
        const auto& c = cfg.clusters[pick(rng)];
        GeoNode n{id, c.lat + c.spread * z(rng), c.lon + c.spread * z(rng), 0.0};
        n.lat = std::clamp(n.lat, -89.0, 89.0);
        return n;
    };
    for (const auto& id : numbered_ids("FC", cfg.n_fc, id_width(cfg.n_fc))) net.fcs.push_back(place(id));
    std::lognormal_distribution<double> demand(0.0, 0.5);
    for (const auto& id : numbered_ids("D", cfg.n_dest, std::max(3, id_width(cfg.n_dest)))) {
        auto n = place(id);
        n.measure = cfg.mean_demand * demand(rng);
        net.dests.push_back(n);
    }

    net.arcs.reserve(static_cast<std::size_t>(cfg.weeks) * net.fcs.size() * net.dests.size());
    for (int w = 0; w < cfg.weeks; ++w) {
        for (const auto& dst : net.dests) {
            const double week_demand = dst.measure * std::max(0.0, 1.0 + 0.1 * z(rng));
            std::vector<double> share;
            double total = 0.0;
            for (const auto& fc : net.fcs) {
                const double d = std::hypot(dst.lat - fc.lat, dst.lon - fc.lon);
                share.push_back(std::pow(std::max(d, 0.5), -cfg.distance_decay));
                total += share.back();
            }
            for (std::size_t i = 0; i < net.fcs.size(); ++i) {
                const auto& fc = net.fcs[i];
                ArcRecord a;
                a.week = w;
                a.origin_id = fc.id;
                a.dest_id = dst.id;
                a.origin_lat = fc.lat;
                a.origin_lon = fc.lon;
                a.dest_lat = dst.lat;
                a.dest_lon = dst.lon;
                a.direct = a.distance() < cfg.direct_radius ? 1 : 0;
                a.packages = std::round(week_demand * share[i] / total);
                a.cost_per_pkg = std::max(0.0, net.expected_cost(a) + cfg.noise_sd * z(rng));
                net.arcs.push_back(std::move(a));
            }
        }
    }
    return net;
}

inline std::vector<ArcRecord> with_flow(const std::vector<ArcRecord>& arcs) {
    std::vector<ArcRecord> out;
    std::copy_if(arcs.begin(), arcs.end(), std::back_inserter(out), [](const ArcRecord& a) { return a.packages > 0.0; });
    return out;
}

// Weekly rankings to drive an episode, plus the truth the operator acts on.
struct EpisodeData {
    std::vector<std::map<std::string, RankingTable>> weekly_ranks;  // by week; the last is reused past the end
    std::map<std::string, std::map<std::string, double>> true_cost;
};

enum class RankSource { cost_model, true_cost };

// Ranks each week from a Cost-variant GBRT fitted on all weeks, or from the
// noise-free cost.
inline EpisodeData episode_data(const SyntheticNetwork& net, RankSource source = RankSource::cost_model,
                                const GbrtConfig& gbrt = {200, 0.1, 3, 1}) {
    EpisodeData data;
    data.true_cost = net.true_costs();
    if (source == RankSource::true_cost) {
        std::vector<ArcCost> costs;
        for (const auto& a : net.arcs) costs.push_back({a.origin_id, a.dest_id, a.week, net.expected_cost(a), false});
        for (int w = 0; w < net.config.weeks; ++w) data.weekly_ranks.push_back(rank_all(costs, w));
        return data;
    }
    const auto sigs = domain_signatures(nodes_from_arcs(net.arcs));
    const auto ds = build_dataset(net.arcs, sigs, FeatureVariant::cost, Target::cost_per_pkg);
    const auto model = fit_gbrt(ds.x, ds.y, gbrt, ds.names);
    const auto predicted = predict_costs(model, net.arcs, sigs);
    for (int w = 0; w < net.config.weeks; ++w) data.weekly_ranks.push_back(rank_all(predicted.costs, w));
    return data;
}

struct OperatorPolicy {
    enum class Kind { true_cost_top_m, fixed_set, noisy_threshold };
    Kind kind = Kind::true_cost_top_m;
    int m = 5;                                                // true_cost_top_m
    std::map<std::string, std::vector<std::string>> fixed;   // fixed_set, per destination
    double threshold = 1.0;                                   // noisy_threshold: cost cutoff
    double noise_sd = 0.1;                                    // noisy_threshold: perception noise
    // Select only among recommended arcs. Otherwise the operator connects its
    // preferred arcs whether or not they were shown.
    bool from_list_only = false;
};

inline const char* to_string(OperatorPolicy::Kind k) {
    switch (k) {
        case OperatorPolicy::Kind::true_cost_top_m: return "true_cost_top_m";
        case OperatorPolicy::Kind::fixed_set: return "fixed_set";
        case OperatorPolicy::Kind::noisy_threshold: return "noisy_threshold";
    }
    return "?";
}

inline OperatorPolicy::Kind parse_policy_kind(const std::string& s) {
    if (s == "true_cost_top_m") return OperatorPolicy::Kind::true_cost_top_m;
    if (s == "fixed_set") return OperatorPolicy::Kind::fixed_set;
    if (s == "noisy_threshold") return OperatorPolicy::Kind::noisy_threshold;
    throw std::invalid_argument("unknown operator policy '" + s + "'");
}

// The arcs this operator connects whenever it can, in id order.
inline std::vector<std::string> preferred_arcs(const OperatorPolicy& p, const std::string& dest,
                                               const std::map<std::string, std::map<std::string, double>>& true_cost) {
    if (p.kind == OperatorPolicy::Kind::fixed_set) {
        auto it = p.fixed.find(dest);
        if (it == p.fixed.end()) return {};
        auto v = it->second;
        std::sort(v.begin(), v.end());
        return v;
    }
    if (p.kind == OperatorPolicy::Kind::noisy_threshold) return {};
    auto it = true_cost.find(dest);
    if (it == true_cost.end()) throw unknown_id_error("destination", dest);
    std::vector<OriginCost> costs;
    for (const auto& [o, c] : it->second) costs.push_back({o, c});
    auto table = rank_arcs(dest, 0, std::move(costs));
    std::vector<std::string> out(table.order.begin(),
                                 table.order.begin() + std::min<std::ptrdiff_t>(p.m, table.n_fc()));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::string> operator_select(const OperatorPolicy& p, const std::string& dest,
                                                const std::vector<std::string>& recommended,
                                                const std::map<std::string, std::map<std::string, double>>& true_cost,
                                                std::mt19937_64& rng) {
    const std::set<std::string> shown(recommended.begin(), recommended.end());
    std::vector<std::string> out;
    if (p.kind == OperatorPolicy::Kind::noisy_threshold) {
        auto it = true_cost.find(dest);
        if (it == true_cost.end()) throw unknown_id_error("destination", dest);
        std::normal_distribution<double> noise(0.0, p.noise_sd);
        for (const auto& o : recommended) {
            auto c = it->second.find(o);
            if (c == it->second.end()) throw unknown_id_error("origin", o);
            if (c->second + noise(rng) <= p.threshold) out.push_back(o);
        }
        return out;
    }
    for (const auto& o : preferred_arcs(p, dest, true_cost))
        if (!p.from_list_only || shown.count(o)) out.push_back(o);
    return out;
}

enum class KRule { fixed_k, expected_kj };

struct EpisodeConfig {
    int weeks = 8;
    int k = 10;
    KRule k_rule = KRule::fixed_k;
    FeedbackMode mode = FeedbackMode::not_selected;
    std::uint64_t seed = 0;
    bool bootstrap_first_round = false;
    bool refresh_ranks = true;
};

struct SeriesRow {
    int week = 0;
    std::string dest_id;
    std::string origin_id;
    double rankpct = 0.0;
    double posterior_mean = 0.0;  // after the week's feedback
    double theta_tilde = 0.0;     // sampled this week
};

struct WeekEntry {
    int week = 0;
    RecommendationRound round;
    std::vector<std::string> selected;
    ExpectedArcs expected;  // from posterior means before the round
};

struct EpisodeLog {
    std::uint64_t seed = 0;
    std::vector<WeekEntry> entries;  // one per (week, dest), weeks outermost
    std::vector<SeriesRow> series;
    BanditState initial;
    BanditState final_state;
};

inline std::uint64_t week_seed(std::uint64_t seed, int week) {
    return detail::splitmix64(seed ^ (0xA5A5A5A5ull + static_cast<std::uint64_t>(week) * 0x9E3779B97F4A7C15ull));
}

inline EpisodeLog run_episode(BanditState state, const EpisodeData& data, const OperatorPolicy& policy,
                              const EpisodeConfig& cfg) {
    if (cfg.weeks < 0) throw std::invalid_argument("run_episode: weeks must be >= 0");
    if (cfg.weeks > 0 && data.weekly_ranks.empty()) throw std::invalid_argument("run_episode: no rankings");
    EpisodeLog log;
    log.seed = cfg.seed;
    log.initial = state;
    std::mt19937_64 operator_rng(detail::splitmix64(cfg.seed ^ 0x0Fe4a7u));
    for (int w = 0; w < cfg.weeks; ++w) {
        const auto& ranks = data.weekly_ranks[std::min<std::size_t>(static_cast<std::size_t>(w), data.weekly_ranks.size() - 1)];
        if (w == 0 || cfg.refresh_ranks) refresh_rankpct(state, rankpct_table(ranks));
        for (const auto& dest : state.dests) {
            WeekEntry e;
            e.week = w;
            e.expected = expected_arcs(state, dest);
            const int k = cfg.k_rule == KRule::fixed_k ? std::min(cfg.k, state.n_fc()) : e.expected.k;
            e.round = sample_round(state, dest, k, week_seed(cfg.seed, w), cfg.bootstrap_first_round);
            e.selected = operator_select(policy, dest, e.round.recommended, data.true_cost, operator_rng);
            apply_feedback(state, e.round, e.selected, cfg.mode);
            const int d = state.dest_index(dest);
            for (int i = 0; i < state.n_fc(); ++i) {
                const auto& p = state.at(d, i);
                log.series.push_back({w, dest, state.origins[i], p.rankpct, p.mean(), e.round.theta_tilde[i]});
            }
            log.entries.push_back(std::move(e));
        }
    }
    log.final_state = std::move(state);
    return log;
}

// Convergence of consistently selected arcs: among arcs selected in each of
// the first `within` weeks with week-0 rankpct above `min_rankpct`, how many
// reach posterior_mean * rankpct > threshold by week `within`.
struct ConvergenceSummary {
    std::size_t tracked = 0;
    std::size_t converged = 0;
    std::size_t untouched = 0;         // never recommended, never selected
    bool untouched_at_prior = true;    // all of them still hold exactly (alpha0, beta0)
    bool passed() const { return converged == tracked && untouched_at_prior; }
};

inline ConvergenceSummary convergence_summary(const EpisodeLog& log, int within = 4, double threshold = 0.5,
                                              double min_rankpct = 0.5) {
    ConvergenceSummary s;
    const auto& st = log.final_state;
    std::map<std::pair<std::string, std::string>, int> selected_weeks;
    std::set<std::pair<std::string, std::string>> touched;
    for (const auto& e : log.entries) {
        for (const auto& o : e.round.recommended) touched.insert({e.round.dest_id, o});
        for (const auto& o : e.selected) {
            touched.insert({e.round.dest_id, o});
            if (e.week < within) ++selected_weeks[{e.round.dest_id, o}];
        }
    }
    std::map<std::pair<std::string, std::string>, bool> reached;
    std::map<std::pair<std::string, std::string>, double> rankpct0;
    for (const auto& r : log.series) {
        const std::pair<std::string, std::string> key{r.dest_id, r.origin_id};
        if (r.week == 0) rankpct0[key] = r.rankpct;
        if (r.week < within && r.posterior_mean * r.rankpct > threshold) reached[key] = true;
    }
    for (const auto& [key, weeks] : selected_weeks) {
        if (weeks < within || rankpct0[key] <= min_rankpct) continue;
        ++s.tracked;
        s.converged += reached[key] ? 1 : 0;
    }
    for (int d = 0; d < st.n_dest(); ++d)
        for (int i = 0; i < st.n_fc(); ++i) {
            if (touched.count({st.dests[d], st.origins[i]})) continue;
            ++s.untouched;
            const auto& p = st.at(d, i);
            if (p.alpha_micro != st.alpha0_micro || p.beta_micro != st.beta0_micro) s.untouched_at_prior = false;
        }
    return s;
}

// Fraction of weeks each arc was recommended, keyed by (dest, origin).
inline std::map<std::pair<std::string, std::string>, double> inclusion_frequency(const EpisodeLog& log) {
    std::map<std::pair<std::string, std::string>, double> out;
    std::map<std::string, int> weeks;
    for (const auto& e : log.entries) {
        ++weeks[e.round.dest_id];
        for (const auto& o : e.round.recommended) out[{e.round.dest_id, o}] += 1.0;
    }
    for (auto& [key, v] : out) v /= weeks[key.first];
    return out;
}

// One row of the per-seed metrics table.
struct EpisodeMetrics {
    std::uint64_t seed = 0;
    int rounds = 0;
    double mean_k = 0.0;
    double mean_selected = 0.0;
    double mean_expected_arcs = 0.0;
    std::size_t tracked = 0;
    std::size_t converged = 0;
    std::size_t untouched = 0;
    bool untouched_at_prior = true;
    bool passed = false;
};

inline EpisodeMetrics episode_metrics(const EpisodeLog& log, int within = 4) {
    EpisodeMetrics m;
    m.seed = log.seed;
    m.rounds = static_cast<int>(log.entries.size());
    for (const auto& e : log.entries) {
        m.mean_k += e.round.k;
        m.mean_selected += static_cast<double>(e.selected.size());
        m.mean_expected_arcs += e.expected.mean;
    }
    if (m.rounds) {
        m.mean_k /= m.rounds;
        m.mean_selected /= m.rounds;
        m.mean_expected_arcs /= m.rounds;
    }
    const auto c = convergence_summary(log, within);
    m.tracked = c.tracked;
    m.converged = c.converged;
    m.untouched = c.untouched;
    m.untouched_at_prior = c.untouched_at_prior;
    m.passed = c.passed();
    return m;
}

inline void write_series_csv(std::ostream& out, const EpisodeLog& log) {
    out << "week,dest_id,origin_id,rankpct,posterior_mean,theta_tilde\n";
    out.precision(17);
    for (const auto& r : log.series)
        out << r.week << ',' << r.dest_id << ',' << r.origin_id << ',' << r.rankpct << ',' << r.posterior_mean << ','
            << r.theta_tilde << '\n';
}

inline constexpr const char* kMetricsHeader =
    "seed,rounds,mean_k,mean_selected,mean_expected_arcs,tracked,converged,untouched,untouched_at_prior,passed";

inline void write_metrics_csv(std::ostream& out, const std::vector<EpisodeMetrics>& rows) {
    out << kMetricsHeader << '\n';
    out.precision(17);
    for (const auto& m : rows)
        out << m.seed << ',' << m.rounds << ',' << m.mean_k << ',' << m.mean_selected << ',' << m.mean_expected_arcs
            << ',' << m.tracked << ',' << m.converged << ',' << m.untouched << ',' << (m.untouched_at_prior ? 1 : 0)
            << ',' << (m.passed ? 1 : 0) << '\n';
}

// Seeded study: for each seed, generate a network, derive weekly ranks, run
// one episode from the priors. Seeds run in parallel; results are in seed order.
struct StudyConfig {
    SyntheticNetworkConfig network;
    OperatorPolicy policy;
    EpisodeConfig episode;
    RankSource ranks = RankSource::cost_model;
    GbrtConfig gbrt{200, 0.1, 3, 1};
    double alpha0 = 0.1;
    double beta0 = 1.0;
};

inline EpisodeLog run_seed(const StudyConfig& cfg, std::uint64_t seed) {
    auto net_cfg = cfg.network;
    net_cfg.seed = seed;
    const auto net = generate_network(net_cfg);
    const auto data = episode_data(net, cfg.ranks, cfg.gbrt);
    std::vector<std::string> fcs, dests;
    for (const auto& n : net.fcs) fcs.push_back(n.id);
    for (const auto& n : net.dests) dests.push_back(n.id);
    auto state = init_state(fcs, dests, rankpct_table(data.weekly_ranks.front()), cfg.alpha0, cfg.beta0);
    auto ep = cfg.episode;
    ep.seed = seed;
    return run_episode(std::move(state), data, cfg.policy, ep);
}

inline std::vector<EpisodeMetrics> run_study(const StudyConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                             unsigned threads = 1, std::vector<EpisodeLog>* logs = nullptr) {
    std::vector<EpisodeMetrics> out(seeds.size());
    std::vector<EpisodeLog> kept(logs ? seeds.size() : 0);
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < seeds.size(); i += step) {
            auto log = run_seed(cfg, seeds[i]);
            out[i] = episode_metrics(log, std::min(4, cfg.episode.weeks));
            if (logs) kept[i] = std::move(log);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, seeds.size()))));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    if (logs) *logs = std::move(kept);
    return out;
}

// What-if for an artificial arc into one destination.
//
// The new arc starts from the (alpha, beta) of the existing arc nearest in
// standardized Cost-feature space. Each seed then samples one round with the
// new arc in the universe; the report gives its position relative to K.
struct ProximityReport {
    std::string dest_id;
    std::string new_origin_id;
    std::string nearest_origin_id;
    double nearest_distance = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double rankpct = 0.0;
    int k = 0;
    std::vector<int> positions;  // per seed: 0-based position of the new arc by theta_tilde
    double included_fraction = 0.0;
    double mean_gap = 0.0;  // mean of (position - K + 1); <= 0 means inside the top K
};

inline ProximityReport whatif_new_arc(const BanditState& state, const std::string& dest,
                                      const std::map<std::string, std::vector<double>>& existing_features,
                                      const std::string& new_origin, const std::vector<double>& new_features,
                                      double new_rankpct, int episodes, std::uint64_t seed,
                                      std::optional<int> k = std::nullopt) {
    if (existing_features.empty()) throw std::invalid_argument("whatif_new_arc: no existing arcs");
    if (episodes < 0) throw std::invalid_argument("whatif_new_arc: episodes must be >= 0");
    if (!(new_rankpct >= 0.0 && new_rankpct <= 1.0)) throw std::invalid_argument("whatif_new_arc: rankpct outside [0, 1]");
    if (std::binary_search(state.origins.begin(), state.origins.end(), new_origin))
        throw std::invalid_argument("whatif_new_arc: origin '" + new_origin + "' already exists");
    const int d = state.dest_index(dest);
    const std::size_t p = new_features.size();

    std::vector<double> mean(p, 0.0), sd(p, 0.0);
    for (const auto& [o, f] : existing_features) {
        if (f.size() != p) throw std::invalid_argument("whatif_new_arc: feature length mismatch for '" + o + "'");
        for (std::size_t j = 0; j < p; ++j) mean[j] += f[j];
    }
    const auto n = static_cast<double>(existing_features.size());
    for (auto& v : mean) v /= n;
    for (const auto& [o, f] : existing_features)
        for (std::size_t j = 0; j < p; ++j) sd[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
    for (auto& v : sd) v = std::sqrt(v / n);

    ProximityReport r;
    r.dest_id = dest;
    r.new_origin_id = new_origin;
    r.nearest_distance = INFINITY;
    for (const auto& [o, f] : existing_features) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double scale = sd[j] > 0.0 ? sd[j] : 1.0;
            d2 += (f[j] - new_features[j]) * (f[j] - new_features[j]) / (scale * scale);
        }
        if (d2 < r.nearest_distance) {  // map order breaks ties by id
            r.nearest_distance = d2;
            r.nearest_origin_id = o;
        }
    }
    r.nearest_distance = std::sqrt(r.nearest_distance);
    const auto& src = state.at(d, state.origin_index(r.nearest_origin_id));

    auto origins = state.origins;
    origins.push_back(new_origin);
    RankpctTable pct;
    for (int i = 0; i < state.n_fc(); ++i) pct[dest][state.origins[i]] = state.at(d, i).rankpct;
    pct[dest][new_origin] = new_rankpct;
    auto local = init_state(origins, {dest}, pct, from_micro(state.alpha0_micro), from_micro(state.beta0_micro));
    for (int i = 0; i < state.n_fc(); ++i) {
        auto& dst = local.at(0, local.origin_index(state.origins[i]));
        dst.alpha_micro = state.at(d, i).alpha_micro;
        dst.beta_micro = state.at(d, i).beta_micro;
    }
    auto& fresh = local.at(0, local.origin_index(new_origin));
    fresh.alpha_micro = src.alpha_micro;
    fresh.beta_micro = src.beta_micro;
    local.rounds[0] = state.rounds[static_cast<std::size_t>(d)];

    r.alpha = fresh.alpha();
    r.beta = fresh.beta();
    r.rankpct = new_rankpct;
    r.k = k ? std::clamp(*k, 1, local.n_fc()) : expected_arcs(local, dest).k;
    if (episodes == 0) return r;

    const int col = local.origin_index(new_origin);
    int included = 0;
    double gap = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto round = sample_round(local, dest, local.n_fc(), detail::splitmix64(seed + static_cast<std::uint64_t>(e)));
        const int pos = static_cast<int>(std::find(round.recommended.begin(), round.recommended.end(), local.origins[col]) -
                                          round.recommended.begin());
        r.positions.push_back(pos);
        included += pos < r.k;
        gap += pos - r.k + 1;
    }
    r.included_fraction = static_cast<double>(included) / episodes;
    r.mean_gap = gap / episodes;
    return r;
}

// Table-1 fixture: flows whose origin shares respond to the origin's oD
// direction signature over exogenous destination demand.
struct PlantedFlowConfig {
    std::uint64_t seed = 7;
    int n_origins = 40;
    int n_dests = 150;
    std::vector<Cluster> clusters = us_clusters();
    double distance_decay = 1.0;
    std::array<double, kDirections> max_weight{0.8, -0.5, 0.6, -0.4};  // on standardized direction max
    std::array<double, kDirections> ring_weight{-0.08, 0.05, -0.06, 0.04};  // per ring of the max
    double noise_sd = 0.3;  // multiplicative, log scale
    double mean_demand = 3000.0;
};

struct PlantedFlowData {
    std::vector<ArcRecord> train;  // week 0
    std::vector<ArcRecord> test;   // week 1, fresh noise
};

inline PlantedFlowData planted_flow_fixture(const PlantedFlowConfig& cfg = {}) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, cfg.clusters.size() - 1);
    auto place = [&](const std::string& id, double measure) {
        const auto& c = cfg.clusters[pick(rng)];
        return GeoNode{id, std::clamp(c.lat + c.spread * 2.0 * z(rng), -89.0, 89.0), c.lon + c.spread * 2.0 * z(rng),
                       measure};
    };
    NodeSet origins{{}, NodeKind::fc}, demand{{}, NodeKind::zip3};
    for (const auto& id : numbered_ids("FC", cfg.n_origins, id_width(cfg.n_origins))) origins.nodes.push_back(place(id, 0.0));
    std::lognormal_distribution<double> dem(0.0, 0.6);
    for (const auto& id : numbered_ids("Z", cfg.n_dests, std::max(3, id_width(cfg.n_dests))))
        demand.nodes.push_back(place(id, cfg.mean_demand * dem(rng)));

    const auto sig = signature_table("oD", origins, demand);
    std::array<double, kDirections> mu{}, sd{};
    for (int k = 0; k < kDirections; ++k) {
        for (const auto& o : origins.nodes) mu[k] += sig.at(o.id).geosig.peaks[k].value;
        mu[k] /= origins.nodes.size();
        for (const auto& o : origins.nodes) {
            const double v = sig.at(o.id).geosig.peaks[k].value - mu[k];
            sd[k] += v * v;
        }
        sd[k] = std::sqrt(sd[k] / origins.nodes.size());
        if (sd[k] == 0.0) sd[k] = 1.0;
    }
    std::vector<double> attract;
    for (const auto& o : origins.nodes) {
        double a = 0.0;
        for (int k = 0; k < kDirections; ++k) {
            const auto& pk = sig.at(o.id).geosig.peaks[k];
            a += cfg.max_weight[k] * (pk.value - mu[k]) / sd[k] + cfg.ring_weight[k] * pk.r_bin;
        }
        attract.push_back(a);
    }

    PlantedFlowData out;
    for (int week = 0; week < 2; ++week) {
        auto& rows = week == 0 ? out.train : out.test;
        for (const auto& dst : demand.nodes) {
            std::vector<double> w;
            double total = 0.0;
            for (std::size_t i = 0; i < origins.nodes.size(); ++i) {
                const auto& o = origins.nodes[i];
                const double d = std::max(0.25, std::hypot(dst.lat - o.lat, dst.lon - o.lon));
                w.push_back(std::exp(attract[i] - cfg.distance_decay * std::log(d) + cfg.noise_sd * z(rng)));
                total += w.back();
            }
            for (std::size_t i = 0; i < origins.nodes.size(); ++i) {
                const auto& o = origins.nodes[i];
                ArcRecord a;
                a.week = week;
                a.origin_id = o.id;
                a.dest_id = dst.id;
                a.origin_lat = o.lat;
                a.origin_lon = o.lon;
                a.dest_lat = dst.lat;
                a.dest_lon = dst.lon;
                // Fractional packages keep every destination's total equal to its demand.
                a.packages = dst.measure * w[i] / total;
                a.cost_per_pkg = 0.5 + 0.05 * a.distance();
                rows.push_back(std::move(a));
            }
        }
    }
    return out;
}

}  // namespace geonet
