#pragma once

// Rank-weighted Thompson sampling over per-arc Beta posteriors.
//
// Every (destination, origin) arc carries Beta(alpha, beta) and a rank
// percentile. A round samples theta_hat ~ Beta, scales it by rankpct and
// recommends the K largest. Operator selections then update the posteriors.
//
// alpha and beta are held as integer micro-units. All updates are +1, -1 or
// the 0.01 floor, so they stay exact and replaying a log reproduces the state
// bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <string>
#include <vector>

#include "geonet/errors.hpp"
#include "geonet/ranker.hpp"

namespace geonet {

inline constexpr std::int64_t kMicro = 1'000'000;
inline constexpr std::int64_t kBetaFloorMicro = 10'000;  // 0.01

inline std::int64_t to_micro(double v) { return std::llround(v * static_cast<double>(kMicro)); }
inline double from_micro(std::int64_t m) { return static_cast<double>(m) / static_cast<double>(kMicro); }

struct ArcPosterior {
    std::int64_t alpha_micro = 100'000;
    std::int64_t beta_micro = 1'000'000;
    double rankpct = 0.5;

    double alpha() const { return from_micro(alpha_micro); }
    double beta() const { return from_micro(beta_micro); }
    double mean() const {
        return static_cast<double>(alpha_micro) / static_cast<double>(alpha_micro + beta_micro);
    }
    bool operator==(const ArcPosterior&) const = default;
};

struct BanditState {
    std::vector<std::string> origins;  // FC universe, column order
    std::vector<std::string> dests;
    std::int64_t alpha0_micro = 100'000;
    std::int64_t beta0_micro = 1'000'000;
    std::vector<ArcPosterior> posteriors;  // dest-major, n_dest() x n_fc()
    std::vector<long> rounds;              // feedback rounds applied per destination
    long t = 0;                            // feedback rounds applied in total
    std::size_t rankpct_defaulted = 0;     // arcs initialized without a rank percentile

    int n_fc() const { return static_cast<int>(origins.size()); }
    int n_dest() const { return static_cast<int>(dests.size()); }

    int dest_index(const std::string& id) const { return find(dests, id, "destination"); }
    int origin_index(const std::string& id) const { return find(origins, id, "origin"); }
    bool has_dest(const std::string& id) const { return std::binary_search(dests.begin(), dests.end(), id); }

    ArcPosterior& at(int d, int i) { return posteriors[static_cast<std::size_t>(d) * origins.size() + i]; }
    const ArcPosterior& at(int d, int i) const { return posteriors[static_cast<std::size_t>(d) * origins.size() + i]; }
    const ArcPosterior& at(const std::string& dest, const std::string& origin) const {
        return at(dest_index(dest), origin_index(origin));
    }

    bool operator==(const BanditState&) const = default;

private:
    static int find(const std::vector<std::string>& ids, const std::string& id, const char* kind) {
        auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id) throw unknown_id_error(kind, id);
        return static_cast<int>(it - ids.begin());
    }
};

// rankpct[dest][origin]; absent entries default to 0.5.
using RankpctTable = std::map<std::string, std::map<std::string, double>>;

inline RankpctTable rankpct_table(const std::map<std::string, RankingTable>& tables) {
    RankpctTable out;
    for (const auto& [dest, t] : tables) out[dest] = t.rankpct;
    return out;
}

inline constexpr double kDefaultRankpct = 0.5;

inline BanditState init_state(std::vector<std::string> origins, std::vector<std::string> dests,
                              const RankpctTable& rankpct = {}, double alpha0 = 0.1, double beta0 = 1.0) {
    if (origins.empty() || dests.empty()) throw std::invalid_argument("init_state: need at least one origin and destination");
    if (!(alpha0 > 0.0) || !(beta0 > 0.0)) throw std::invalid_argument("init_state: hyperparameters must be positive");
    auto sort_unique = [](std::vector<std::string>& v, const char* kind) {
        std::sort(v.begin(), v.end());
        if (std::adjacent_find(v.begin(), v.end()) != v.end())
            throw std::invalid_argument(std::string("init_state: duplicate ") + kind + " id");
    };
    sort_unique(origins, "origin");
    sort_unique(dests, "destination");

    BanditState s;
    s.origins = std::move(origins);
    s.dests = std::move(dests);
    s.alpha0_micro = to_micro(alpha0);
    s.beta0_micro = to_micro(beta0);
    if (s.alpha0_micro <= 0 || s.beta0_micro <= 0) throw std::invalid_argument("init_state: hyperparameters below 1e-6");
    s.posteriors.resize(s.origins.size() * s.dests.size());
    s.rounds.assign(s.dests.size(), 0);
    for (int d = 0; d < s.n_dest(); ++d) {
        auto row = rankpct.find(s.dests[d]);
        for (int i = 0; i < s.n_fc(); ++i) {
            auto& p = s.at(d, i);
            p.alpha_micro = s.alpha0_micro;
            p.beta_micro = s.beta0_micro;
            p.rankpct = kDefaultRankpct;
            const double* r = nullptr;
            if (row != rankpct.end()) {
                auto it = row->second.find(s.origins[i]);
                if (it != row->second.end()) r = &it->second;
            }
            if (r) {
                if (!(*r >= 0.0 && *r <= 1.0))
                    throw std::invalid_argument("init_state: rankpct outside [0, 1] for " + s.origins[i] + "->" + s.dests[d]);
                p.rankpct = *r;
            } else {
                ++s.rankpct_defaulted;
            }
        }
    }
    return s;
}

// Ids "FC00".. and "D000".. for synthetic states.
inline std::vector<std::string> numbered_ids(const std::string& prefix, int n, int width) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        auto num = std::to_string(i);
        out.push_back(prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num);
    }
    return out;
}

inline BanditState init_state(int n_fc, int n_dest, double alpha0 = 0.1, double beta0 = 1.0) {
    if (n_fc < 1 || n_dest < 1) throw std::invalid_argument("init_state: need at least one origin and destination");
    return init_state(numbered_ids("FC", n_fc, 2), numbered_ids("D", n_dest, 3), {}, alpha0, beta0);
}

// Overwrites rank percentiles from fresh weekly tables; arcs missing from a
// table keep their previous value.
inline void refresh_rankpct(BanditState& s, const RankpctTable& rankpct) {
    for (const auto& [dest, row] : rankpct) {
        const int d = s.dest_index(dest);
        for (const auto& [origin, r] : row) {
            if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("refresh_rankpct: rankpct outside [0, 1]");
            s.at(d, s.origin_index(origin)).rankpct = r;
        }
    }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t arc_stream(std::uint64_t seed, int dest, int origin, long round) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(dest));
    h = splitmix64(h ^ static_cast<std::uint64_t>(origin));
    return splitmix64(h ^ static_cast<std::uint64_t>(round));
}

}  // namespace detail

// Beta draw from two gamma draws on an arc-private stream, so results do not
// depend on the order arcs are visited.
inline double sample_beta(double alpha, double beta, std::uint64_t stream) {
    std::mt19937_64 rng(stream);
    std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    if (!(x + y > 0.0)) return alpha / (alpha + beta);  // both draws underflowed
    return x / (x + y);
}

struct RecommendationRound {
    std::string dest_id;
    long t = 0;  // the destination's round number this recommendation belongs to
    int k = 0;
    std::uint64_t seed = 0;
    bool bootstrap = false;
    std::vector<std::string> recommended;  // theta_tilde descending
    std::vector<double> theta_hat;         // per origin, state column order
    std::vector<double> theta_tilde;
};

// Recommend the K arcs with the largest theta_tilde for one destination.
// With `bootstrap_first_round`, a destination's round 0 ranks by rankpct alone.
inline RecommendationRound sample_round(const BanditState& s, const std::string& dest, int k, std::uint64_t seed,
                                        bool bootstrap_first_round = false) {
    const int d = s.dest_index(dest);
    if (k < 1 || k > s.n_fc())
        throw std::invalid_argument("sample_round: K must be in [1, " + std::to_string(s.n_fc()) + "]");
    RecommendationRound r;
    r.dest_id = dest;
    r.t = s.rounds[static_cast<std::size_t>(d)];
    r.k = k;
    r.seed = seed;
    r.bootstrap = bootstrap_first_round && r.t == 0;
    const auto n = static_cast<std::size_t>(s.n_fc());
    r.theta_hat.resize(n);
    r.theta_tilde.resize(n);
    for (int i = 0; i < s.n_fc(); ++i) {
        const auto& p = s.at(d, i);
        r.theta_hat[i] = r.bootstrap ? 1.0 : sample_beta(p.alpha(), p.beta(), detail::arc_stream(seed, d, i, r.t));
        r.theta_tilde[i] = r.theta_hat[i] * p.rankpct;
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        if (r.theta_tilde[a] != r.theta_tilde[b]) return r.theta_tilde[a] > r.theta_tilde[b];
        const double ra = s.at(d, a).rankpct, rb = s.at(d, b).rankpct;
        if (ra != rb) return ra > rb;
        return a < b;  // origins are sorted, so index order is id order
    });
    for (int j = 0; j < k; ++j) r.recommended.push_back(s.origins[order[j]]);
    return r;
}

enum class FeedbackMode { not_selected, any_recommended };

inline const char* to_string(FeedbackMode m) {
    return m == FeedbackMode::not_selected ? "not_selected" : "any_recommended";
}

inline FeedbackMode parse_feedback_mode(const std::string& s) {
    if (s == "not_selected") return FeedbackMode::not_selected;
    if (s == "any_recommended") return FeedbackMode::any_recommended;
    throw std::invalid_argument("unknown feedback mode '" + s + "'");
}

struct ArcDelta {
    std::string origin_id;
    int d_alpha = 0;
    int d_beta = 0;
    double alpha = 0.0;  // after the update
    double beta = 0.0;
};

struct FeedbackResult {
    std::string dest_id;
    long t = 0;
    std::vector<ArcDelta> deltas;  // touched arcs, state column order
};

// Membership rule for one arc.
inline std::pair<int, int> feedback_increments(bool recommended, bool selected, FeedbackMode mode) {
    const int da = selected ? 1 : 0;
    const int db = recommended && (mode == FeedbackMode::any_recommended || !selected) ? 1 : 0;
    return {da, db};
}

// Applies the operator's selections for round `t` of `dest`. All ids are
// checked before anything changes. A round other than the destination's
// current one is rejected, which also rejects replaying the same feedback.
inline FeedbackResult apply_feedback(BanditState& s, const std::string& dest, long t,
                                     const std::vector<std::string>& recommended,
                                     const std::vector<std::string>& selected,
                                     FeedbackMode mode = FeedbackMode::not_selected) {
    const int d = s.dest_index(dest);
    if (t != s.rounds[static_cast<std::size_t>(d)])
        throw stale_round_error("round " + std::to_string(t) + " for destination '" + dest + "' is not current (" +
                                std::to_string(s.rounds[static_cast<std::size_t>(d)]) + ")");
    std::vector<char> in_rec(static_cast<std::size_t>(s.n_fc()), 0), in_sel(static_cast<std::size_t>(s.n_fc()), 0);
    for (const auto& o : recommended) {
        auto& flag = in_rec[static_cast<std::size_t>(s.origin_index(o))];
        if (flag) throw std::invalid_argument("apply_feedback: duplicate recommended origin '" + o + "'");
        flag = 1;
    }
    for (const auto& o : selected) {
        auto& flag = in_sel[static_cast<std::size_t>(s.origin_index(o))];
        if (flag) throw std::invalid_argument("apply_feedback: duplicate selected origin '" + o + "'");
        flag = 1;
    }

    FeedbackResult out;
    out.dest_id = dest;
    out.t = t;
    for (int i = 0; i < s.n_fc(); ++i) {
        auto [da, db] = feedback_increments(in_rec[i], in_sel[i], mode);
        if (!in_rec[i] && !in_sel[i]) continue;
        auto& p = s.at(d, i);
        p.alpha_micro += da * kMicro;
        p.beta_micro += db * kMicro;
        out.deltas.push_back({s.origins[i], da, db, p.alpha(), p.beta()});
    }
    ++s.rounds[static_cast<std::size_t>(d)];
    ++s.t;
    return out;
}

inline FeedbackResult apply_feedback(BanditState& s, const RecommendationRound& r, const std::vector<std::string>& selected,
                                     FeedbackMode mode = FeedbackMode::not_selected) {
    return apply_feedback(s, r.dest_id, r.t, r.recommended, selected, mode);
}

struct ExpectedArcs {
    double mean = 0.0;
    double sd = 0.0;
    int k = 1;  // round(mean) clamped to [1, N_FC]
};

inline ExpectedArcs expected_arcs(const std::vector<double>& theta) {
    if (theta.empty()) throw std::invalid_argument("expected_arcs: empty theta");
    ExpectedArcs e;
    double var = 0.0;
    for (double p : theta) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("expected_arcs: theta outside [0, 1]");
        e.mean += p;
        var += p * (1.0 - p);
    }
    e.sd = std::sqrt(var);
    e.k = std::clamp(static_cast<int>(std::lround(e.mean)), 1, static_cast<int>(theta.size()));
    return e;
}

// Default theta estimate: posterior mean times rankpct.
inline std::vector<double> theta_tilde_means(const BanditState& s, const std::string& dest) {
    const int d = s.dest_index(dest);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(s.n_fc()));
    for (int i = 0; i < s.n_fc(); ++i) out.push_back(s.at(d, i).mean() * s.at(d, i).rankpct);
    return out;
}

inline ExpectedArcs expected_arcs(const BanditState& s, const std::string& dest) {
    return expected_arcs(theta_tilde_means(s, dest));
}

// beta := max(beta - 1, 0.01) for arcs whose rank worsened by at least
// `threshold` places between the two tables. Returns how many were penalized.
// Arcs whose rank worsened by at least `threshold` positions, as (dest, origin).
inline std::vector<std::pair<std::string, std::string>> rank_drop_arcs(
    const BanditState& s, const std::map<std::string, RankingTable>& old_ranks,
    const std::map<std::string, RankingTable>& new_ranks, int threshold) {
    if (threshold < 1) throw std::invalid_argument("rank_drop_penalty: threshold must be >= 1");
    std::vector<std::pair<std::string, std::string>> hits;
    for (const auto& [dest, before] : old_ranks) {
        auto it = new_ranks.find(dest);
        if (it == new_ranks.end()) throw std::invalid_argument("rank_drop_penalty: destination '" + dest + "' missing");
        if (it->second.rank.size() != before.rank.size())
            throw std::invalid_argument("rank_drop_penalty: tables cover different arcs for '" + dest + "'");
        s.dest_index(dest);
        for (const auto& [origin, r0] : before.rank)
            if (it->second.rank_of(origin) - r0 >= threshold) {
                s.origin_index(origin);
                hits.emplace_back(dest, origin);
            }
    }
    return hits;
}

inline void apply_rank_drop(BanditState& s, const std::vector<std::pair<std::string, std::string>>& arcs) {
    std::vector<ArcPosterior*> targets;
    for (const auto& [dest, origin] : arcs) targets.push_back(&s.at(s.dest_index(dest), s.origin_index(origin)));
    for (auto* p : targets) p->beta_micro = std::max(p->beta_micro - kMicro, kBetaFloorMicro);
}

inline std::size_t rank_drop_penalty(BanditState& s, const std::map<std::string, RankingTable>& old_ranks,
                                     const std::map<std::string, RankingTable>& new_ranks, int threshold) {
    const auto hits = rank_drop_arcs(s, old_ranks, new_ranks, threshold);
    apply_rank_drop(s, hits);
    return hits.size();
}

// FNV-1a over everything that feedback and rank refreshes can change.
inline std::uint64_t state_hash(const BanditState& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    mix(static_cast<std::uint64_t>(s.t));
    for (long r : s.rounds) mix(static_cast<std::uint64_t>(r));
    for (const auto& p : s.posteriors) {
        mix(static_cast<std::uint64_t>(p.alpha_micro));
        mix(static_cast<std::uint64_t>(p.beta_micro));
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof p.rankpct);
        std::memcpy(&bits, &p.rankpct, sizeof bits);
        mix(bits);
    }
    return h;
}

}  // namespace geonet
