#pragma once

// HTTP/JSON API over a bandit state: recommendations, feedback, read views and
// what-if experiments. `ApiSession::handle` is the transport-independent core;
// `HttpServer` binds it to cpp-httplib. All routes live under /v1 and errors
// are {"code", "message"}.
//
// Protocol: GET .../recommendations opens a pending round for a destination;
// POST .../selections closes it. The round is appended to the event log and
// fsynced before the state changes and before any 2xx is returned.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "geonet/bandit.hpp"
#include "geonet/datastore.hpp"
#include "geonet/flowmodel.hpp"
#include "geonet/ranker.hpp"
#include "geonet/simharness.hpp"

// Last: httplib pulls in <resolv.h>, whose `_res` macro breaks Eigen headers
// parsed after it.
#include <httplib.h>

namespace geonet {

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string authorization;  // raw Authorization header
};

struct HttpResponse {
    int status = 200;
    json body;
};

struct ApiError : std::runtime_error {
    int status;
    std::string code;
    ApiError(int s, std::string c, const std::string& msg) : std::runtime_error(msg), status(s), code(std::move(c)) {}
};

// Fitted artifacts behind the geosig and what-if endpoints. Every member is
// optional; endpoints needing a missing piece answer 503.
struct ServiceModels {
    NetworkNodes nodes;
    SignatureConfig signatures;
    std::optional<FlowModel> flow_model;  // variant D, packages target
    std::optional<Dataset> flow_test;     // variant D rows the hub experiment perturbs
    std::optional<FlowModel> cost_model;  // Cost variant, cost_per_pkg target
    DomainSignatures cost_sigs;
    std::vector<ArcRecord> current_arcs;          // latest week, used for new-arc features
    std::map<std::string, RankingTable> ranks;    // latest predicted-cost tables
};

// Fits both models from weekly arc records: training weeks for fitting, the
// test week for the hub experiment and the current rank tables.
inline ServiceModels build_service_models(const std::vector<ArcRecord>& train, const std::vector<ArcRecord>& test,
                                          ModelKind kind = ModelKind::gbrt, const GbrtConfig& gbrt = {200, 0.1, 3, 1}) {
    if (train.empty() || test.empty()) throw std::invalid_argument("build_service_models: empty arc set");
    ServiceModels m;
    m.nodes = nodes_from_arcs(train);
    const auto sigs = domain_signatures(m.nodes, m.signatures);
    m.flow_model = fit_model(build_dataset(train, sigs, FeatureVariant::d), kind, gbrt);
    m.flow_test = build_dataset(test, sigs, FeatureVariant::d);
    m.cost_sigs = sigs;
    m.cost_model = fit_model(build_dataset(train, sigs, FeatureVariant::cost, Target::cost_per_pkg), kind, gbrt);
    m.current_arcs = test;
    const auto preds = std::visit([&](const auto& mm) { return predict_costs(mm, test, sigs); }, *m.cost_model);
    m.ranks = rank_all(preds.costs, test.front().week);
    return m;
}

struct SessionConfig {
    KRule k_rule = KRule::expected_kj;  // used when a request omits k
    int fixed_k = 10;
    FeedbackMode mode = FeedbackMode::not_selected;
    bool bootstrap_first_round = false;
    std::string token;                   // empty: no auth
    int whatif_episodes = 200;
    std::string hub_origin_id = "HUB";
    // Test hook: runs after a round is durable and before state changes.
    std::function<void(const Event&)> on_durable;
};

inline const char* kDirectionNames[kDirections] = {"NE", "NW", "SW", "SE"};

struct WhatIfRequest {
    GeoNode hub;
    double fraction = 0.0;
    HubConfig hub_config;
    std::optional<std::string> dest;  // default: first destination with current arcs
    int episodes = 200;
};

inline WhatIfRequest parse_whatif_request(const json& body, const std::string& hub_id = "HUB", int episodes = 200) {
    WhatIfRequest r;
    r.episodes = episodes;
    try {
        r.hub = {hub_id, body.at("lat").get<double>(), body.at("lon").get<double>(), 0.0};
        r.fraction = body.at("fraction").get<double>();
        r.hub_config.seed = body.value("seed", std::uint64_t{0});
        if (body.contains("means")) {
            const auto& mm = body["means"];
            r.hub_config.sw_max_mean = mm.value("sw_max", r.hub_config.sw_max_mean);
            if (mm.contains("distance")) r.hub_config.distance_mean = mm["distance"].get<double>();
        }
        if (body.contains("dest_id")) r.dest = body["dest_id"].get<std::string>();
        r.episodes = body.value("episodes", r.episodes);
    } catch (const json::exception& e) {
        throw ApiError(400, "invalid_body", e.what());
    }
    if (!(r.fraction >= 0.0 && r.fraction <= 1.0)) throw ApiError(400, "invalid_fraction", "fraction must be in [0, 1]");
    if (r.episodes < 0) throw ApiError(400, "invalid_body", "episodes must be >= 0");
    try {
        validate(r.hub);
    } catch (const std::invalid_argument& e) {
        throw ApiError(400, "invalid_body", e.what());
    }
    return r;
}

inline json direction_deltas_json(const DirectionDeltas& d) {
    json out = json::array();
    for (int k = 0; k < kDirections; ++k)
        out.push_back({{"direction", kDirectionNames[k]}, {"aggregate", d.aggregate[k]}, {"delta", d.delta[k]}});
    return out;
}

// Where a new hub -> dest arc would land among the destination's
// recommendations. Null when the cost model or the destination's arcs
// are unavailable.
inline json new_arc_proximity(const ServiceModels& m, const BanditState& state, const GeoNode& hub,
                              std::optional<std::string> dest, int episodes, std::uint64_t seed) {
    if (!m.cost_model || m.current_arcs.empty()) return nullptr;
    if (!dest) {
        for (const auto& id : state.dests)
            if (m.ranks.count(id) && m.nodes.destinations.find(id)) {
                dest = id;
                break;
            }
        if (!dest) return nullptr;
    }
    if (!state.has_dest(*dest)) throw ApiError(404, "unknown_destination", "unknown destination '" + *dest + "'");
    const auto* dnode = m.nodes.destinations.find(*dest);
    if (!dnode) return nullptr;

    std::map<std::string, std::vector<double>> existing;
    std::vector<OriginCost> costs;
    double packages = 0.0;
    int week = 0;
    for (const auto& a : m.current_arcs) {
        if (a.dest_id != *dest || !std::binary_search(state.origins.begin(), state.origins.end(), a.origin_id))
            continue;
        const auto fv = build_features(a, m.cost_sigs, FeatureVariant::cost);
        existing[a.origin_id] = fv.values;
        costs.push_back({a.origin_id, std::max(0.0, predict(*m.cost_model, fv.values))});
        packages += a.packages;
        week = a.week;
    }
    if (existing.empty()) return nullptr;

    ArcRecord arc;
    arc.week = week;
    arc.origin_id = hub.id;
    arc.dest_id = *dest;
    arc.packages = packages / static_cast<double>(existing.size());
    arc.origin_lat = hub.lat;
    arc.origin_lon = hub.lon;
    arc.dest_lat = dnode->lat;
    arc.dest_lon = dnode->lon;
    auto sigs = m.cost_sigs;
    const auto hub_table = signature_table("oD", NodeSet{{hub}, NodeKind::fc}, m.nodes.destinations, m.signatures);
    sigs.origin_dest->nodes[hub.id] = hub_table.nodes.at(hub.id);
    const auto fv = build_features(arc, sigs, FeatureVariant::cost);
    const double cost = std::max(0.0, predict(*m.cost_model, fv.values));
    costs.push_back({hub.id, cost});
    const auto table = rank_arcs(*dest, week, costs);
    const double pct = table.rankpct_of(hub.id);

    ProximityReport r;
    try {
        r = whatif_new_arc(state, *dest, existing, hub.id, fv.values, pct, episodes, seed);
    } catch (const std::invalid_argument& e) {
        throw ApiError(400, "invalid_body", e.what());
    }
    return {{"dest_id", r.dest_id},
            {"new_origin_id", r.new_origin_id},
            {"predicted_cost", cost},
            {"rank", table.rank_of(hub.id)},
            {"rankpct", r.rankpct},
            {"nearest_origin_id", r.nearest_origin_id},
            {"nearest_distance", r.nearest_distance},
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"k", r.k},
            {"episodes", r.positions.size()},
            {"included_fraction", r.included_fraction},
            {"mean_gap", r.mean_gap}};
}

// Hub experiment deltas against the unmodified test rows, plus the new-arc
// proximity report. Deterministic for a fixed request.
inline json whatif_hub_report(const ServiceModels& m, const BanditState& state, const WhatIfRequest& req) {
    if (!m.flow_model || !m.flow_test) throw ApiError(503, "model_unavailable", "no flow model is loaded");
    const auto hr = hub_experiment(*m.flow_test, req.hub, req.fraction, req.hub_config);
    const auto [baseline, modified] = std::visit(
        [&](const auto& model) {
            return std::pair{direction_flow_delta(model, *m.flow_test), direction_flow_delta(model, *m.flow_test, &hr.data)};
        },
        *m.flow_model);
    json change = json::array();
    for (int k = 0; k < kDirections; ++k) change.push_back(modified.delta[k] - baseline.delta[k]);
    return {{"hub", {{"lat", req.hub.lat}, {"lon", req.hub.lon}}},
            {"fraction", req.fraction},
            {"seed", req.hub_config.seed},
            {"modified_rows", hr.modified_rows.size()},
            {"eligible", hr.eligible},
            {"exhausted", hr.exhausted},
            {"baseline", direction_deltas_json(baseline)},
            {"modified", direction_deltas_json(modified)},
            {"delta_change", std::move(change)},
            {"proximity", new_arc_proximity(m, state, req.hub, req.dest, req.episodes, req.hub_config.seed)}};
}

class ApiSession {
public:
    // Replays `log_path` over `initial` and keeps appending to it.
    ApiSession(BanditState initial, const std::string& log_path, SessionConfig cfg = {},
               std::shared_ptr<const ServiceModels> models = nullptr)
        : cfg_(std::move(cfg)), models_(std::move(models)) {
        auto contents = read_events(log_path);
        warnings_ = contents.warnings;
        state_ = replay(contents.events, std::move(initial), [this](const Event& e, const BanditState&, const BanditState& after) {
            if (e.type == "round") record_history(e.payload, after);
        });
        log_ = std::make_unique<EventLog>(log_path);
    }

    HttpResponse handle(const HttpRequest& req) {
        try {
            if (!cfg_.token.empty() && req.authorization != "Bearer " + cfg_.token)
                throw ApiError(401, "unauthorized", "missing or wrong bearer token");
            return route(req);
        } catch (const ApiError& e) {
            return error(e.status, e.code, e.what());
        } catch (const std::exception& e) {
            return error(500, "internal", e.what());
        }
    }

    BanditState state() const {
        std::shared_lock lock(mu_);
        return state_;
    }
    std::uint64_t hash() const {
        std::shared_lock lock(mu_);
        return state_hash(state_);
    }
    const std::vector<std::string>& startup_warnings() const { return warnings_; }
    const std::string& log_path() const { return log_->path(); }

private:
    static HttpResponse error(int status, const std::string& code, const std::string& message) {
        return {status, {{"code", code}, {"message", message}}};
    }

    static std::vector<std::string> split_path(const std::string& path) {
        std::vector<std::string> parts;
        std::stringstream ss(path);
        std::string p;
        while (std::getline(ss, p, '/'))
            if (!p.empty()) parts.push_back(p);
        return parts;
    }

    HttpResponse route(const HttpRequest& req) {
        const auto p = split_path(req.path);
        if (p.empty() || p[0] != "v1") throw ApiError(404, "unknown_route", "no route for '" + req.path + "'");
        const auto n = p.size();
        auto is = [&](const char* method) { return req.method == method; };
        auto wrong_method = [&] { return ApiError(405, "method_not_allowed", req.method + " not allowed on " + req.path); };

        if (n == 2 && p[1] == "health") return {200, {{"status", "ok"}}};
        if (n == 2 && p[1] == "state") {
            if (!is("GET")) throw wrong_method();
            std::shared_lock lock(mu_);
            return {200, snapshot_json(state_)};
        }
        if (n == 3 && p[1] == "state" && p[2] == "hash") {
            if (!is("GET")) throw wrong_method();
            std::shared_lock lock(mu_);
            return {200, {{"t", state_.t}, {"hash", hex(state_hash(state_))}}};
        }
        if (n == 2 && p[1] == "destinations") {
            if (!is("GET")) throw wrong_method();
            return {200, list_destinations()};
        }
        if (n == 4 && p[1] == "destinations") {
            const auto& dest = p[2];
            if (p[3] == "recommendations") {
                if (is("GET")) return recommendations(dest, req.query);
                if (is("DELETE")) return cancel_pending(dest);
                throw wrong_method();
            }
            if (p[3] == "selections") {
                if (!is("POST")) throw wrong_method();
                return selections(dest, req.body);
            }
            if (p[3] == "history") {
                if (!is("GET")) throw wrong_method();
                return history(dest);
            }
        }
        if (n == 4 && p[1] == "nodes" && p[3] == "geosig") {
            if (!is("GET")) throw wrong_method();
            return node_geosig(p[2], req.query);
        }
        if (n == 3 && p[1] == "whatif" && p[2] == "hub") {
            if (!is("POST")) throw wrong_method();
            return whatif_hub(req.body);
        }
        throw ApiError(404, "unknown_route", "no route for '" + req.path + "'");
    }

    static std::string hex(std::uint64_t v) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }

    template <class T>
    static T parse_number(const std::string& s, const char* what) {
        T v{};
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size())
            throw ApiError(400, std::string("invalid_") + what, std::string(what) + " must be an integer");
        return v;
    }

    static json parse_body(const std::string& body) {
        try {
            auto j = json::parse(body);
            if (!j.is_object()) throw ApiError(400, "invalid_body", "body must be a JSON object");
            return j;
        } catch (const json::parse_error& e) {
            throw ApiError(400, "invalid_json", e.what());
        }
    }

    int require_dest(const std::string& dest) const {
        if (!state_.has_dest(dest)) throw ApiError(404, "unknown_destination", "unknown destination '" + dest + "'");
        return state_.dest_index(dest);
    }

    json list_destinations() const {
        std::shared_lock lock(mu_);
        std::lock_guard plock(pending_mu_);
        json out = json::array();
        for (int d = 0; d < state_.n_dest(); ++d) {
            const auto& id = state_.dests[d];
            out.push_back({{"dest_id", id}, {"round", state_.rounds[static_cast<std::size_t>(d)]},
                           {"pending", pending_.count(id) > 0}});
        }
        return out;
    }

    json round_body(const RecommendationRound& r, const ExpectedArcs& e, bool explicit_k) const {
        json arcs = json::array();
        const int d = state_.dest_index(r.dest_id);
        const RankingTable* table = nullptr;
        if (models_) {
            if (auto it = models_->ranks.find(r.dest_id); it != models_->ranks.end()) table = &it->second;
        }
        for (std::size_t pos = 0; pos < r.recommended.size(); ++pos) {
            const auto& o = r.recommended[pos];
            const int i = state_.origin_index(o);
            const auto& post = state_.at(d, i);
            json a{{"position", pos},
                   {"origin_id", o},
                   {"theta_hat", r.theta_hat[static_cast<std::size_t>(i)]},
                   {"theta_tilde", r.theta_tilde[static_cast<std::size_t>(i)]},
                   {"rankpct", post.rankpct},
                   {"posterior_mean", post.mean()},
                   {"alpha", post.alpha()},
                   {"beta", post.beta()},
                   {"distance", nullptr},
                   {"predicted_cost", nullptr}};
            if (table) {
                if (auto it = table->predicted_cost.find(o); it != table->predicted_cost.end()) a["predicted_cost"] = it->second;
            }
            if (const auto dist = distance_miles(o, r.dest_id)) a["distance"] = *dist;
            arcs.push_back(std::move(a));
        }
        return {{"dest_id", r.dest_id},
                {"round_t", r.t},
                {"k", r.k},
                {"k_rule", explicit_k ? "explicit" : (cfg_.k_rule == KRule::fixed_k ? "fixed_k" : "expected_kj")},
                {"seed", r.seed},
                {"bootstrap", r.bootstrap},
                {"expected_arcs", {{"mean", e.mean}, {"sd", e.sd}, {"k", e.k}}},
                {"arcs", std::move(arcs)}};
    }

    // Miles between an origin and a destination, when both are known nodes.
    std::optional<double> distance_miles(const std::string& origin, const std::string& dest) const {
        if (!models_) return std::nullopt;
        const auto* o = models_->nodes.origins.find(origin);
        const auto* d = models_->nodes.destinations.find(dest);
        if (!o || !d) return std::nullopt;
        return std::hypot(d->lat - o->lat, d->lon - o->lon) * kMilesPerDegree;
    }

    struct Pending {
        RecommendationRound round;
        bool explicit_k = false;
        json body;
    };

    HttpResponse recommendations(const std::string& dest, const std::map<std::string, std::string>& query) {
        std::shared_lock lock(mu_);
        require_dest(dest);
        std::optional<int> k;
        std::optional<std::uint64_t> seed;
        if (auto it = query.find("k"); it != query.end()) {
            k = parse_number<int>(it->second, "k");
            if (*k < 1 || *k > state_.n_fc())
                throw ApiError(400, "invalid_k", "k must be in [1, " + std::to_string(state_.n_fc()) + "]");
        }
        if (auto it = query.find("seed"); it != query.end()) seed = parse_number<std::uint64_t>(it->second, "seed");

        std::lock_guard plock(pending_mu_);
        if (auto it = pending_.find(dest); it != pending_.end()) {
            const auto& r = it->second.round;
            if ((!k || *k == r.k) && (!seed || *seed == r.seed)) return {200, it->second.body};
            throw ApiError(409, "pending_round",
                           "round " + std::to_string(r.t) + " for '" + dest + "' awaits selections");
        }
        const auto e = expected_arcs(state_, dest);
        int kk = e.k;
        if (k) kk = *k;
        else if (cfg_.k_rule == KRule::fixed_k) kk = std::clamp(cfg_.fixed_k, 1, state_.n_fc());
        // 53 bits so the seed survives a round trip through JavaScript numbers.
        const std::uint64_t s = seed ? *seed : (std::random_device{}() * 0x100000000ull + std::random_device{}()) & ((1ull << 53) - 1);
        Pending p;
        p.round = sample_round(state_, dest, kk, s, cfg_.bootstrap_first_round);
        p.explicit_k = k.has_value();
        p.body = round_body(p.round, e, p.explicit_k);
        auto body = p.body;
        pending_.emplace(dest, std::move(p));
        return {200, std::move(body)};
    }

    HttpResponse cancel_pending(const std::string& dest) {
        std::shared_lock lock(mu_);
        require_dest(dest);
        std::lock_guard plock(pending_mu_);
        const bool had = pending_.erase(dest) > 0;
        return {200, {{"dest_id", dest}, {"cancelled", had}}};
    }

    HttpResponse selections(const std::string& dest, const std::string& raw) {
        std::unique_lock lock(mu_);
        const int d = require_dest(dest);
        const auto body = parse_body(raw);
        long round_t = 0;
        std::vector<std::string> selected;
        try {
            round_t = body.at("round_t").get<long>();
            selected = body.at("selected").get<std::vector<std::string>>();
        } catch (const json::exception&) {
            throw ApiError(400, "invalid_body", "expected {\"round_t\": integer, \"selected\": [origin ids]}");
        }
        std::lock_guard plock(pending_mu_);
        const long current = state_.rounds[static_cast<std::size_t>(d)];
        auto it = pending_.find(dest);
        if (round_t != current)
            throw ApiError(409, "stale_round",
                           "round_t " + std::to_string(round_t) + " is not current (" + std::to_string(current) + ")");
        if (it == pending_.end())
            throw ApiError(409, "no_pending_round", "no recommendation is pending for '" + dest + "'");
        for (const auto& o : selected)
            if (!std::binary_search(state_.origins.begin(), state_.origins.end(), o))
                throw ApiError(400, "unknown_origin", "unknown origin '" + o + "'");

        const auto& round = it->second.round;
        BanditState next = state_;
        FeedbackResult fb;
        try {
            fb = apply_feedback(next, round, selected, cfg_.mode);
        } catch (const std::invalid_argument& e) {
            throw ApiError(400, "invalid_selection", e.what());
        }
        const auto payload = round_payload(round, selected, cfg_.mode);
        Event ev{0, "", "round", payload};
        try {
            ev.seq = log_->append("round", payload);
        } catch (const std::exception& e) {
            throw ApiError(500, "log_write_failed", e.what());
        }
        if (cfg_.on_durable) cfg_.on_durable(ev);
        state_ = std::move(next);
        pending_.erase(it);
        record_history(payload, state_);

        json deltas = json::array();
        for (const auto& a : fb.deltas)
            deltas.push_back({{"origin_id", a.origin_id}, {"d_alpha", a.d_alpha}, {"d_beta", a.d_beta},
                              {"alpha", a.alpha}, {"beta", a.beta}});
        return {200,
                {{"dest_id", dest},
                 {"round_t", round_t},
                 {"seq", ev.seq},
                 {"mode", to_string(cfg_.mode)},
                 {"state_t", state_.t},
                 {"deltas", std::move(deltas)}}};
    }

    // One entry per applied round; `after` is the state the round produced.
    void record_history(const json& payload, const BanditState& after) {
        const auto dest = payload.at("dest_id").get<std::string>();
        const int d = after.dest_index(dest);
        const auto rec = payload.at("recommended").get<std::vector<std::string>>();
        const auto sel = payload.at("selected").get<std::vector<std::string>>();
        const auto tilde = payload.at("theta_tilde").get<std::vector<double>>();
        json arcs = json::array();
        for (int i = 0; i < after.n_fc(); ++i) {
            const auto& o = after.origins[i];
            const auto& p = after.at(d, i);
            arcs.push_back({{"origin_id", o},
                            {"rankpct", p.rankpct},
                            {"posterior_mean", p.mean()},
                            {"theta_tilde", i < static_cast<int>(tilde.size()) ? json(tilde[i]) : json(nullptr)},
                            {"recommended", std::find(rec.begin(), rec.end(), o) != rec.end()},
                            {"selected", std::find(sel.begin(), sel.end(), o) != sel.end()}});
        }
        history_[dest].push_back({{"round_t", payload.at("t")},
                                  {"k", payload.value("k", static_cast<int>(rec.size()))},
                                  {"seed", payload.value("seed", std::uint64_t{0})},
                                  {"mode", payload.value("mode", "not_selected")},
                                  {"recommended", rec},
                                  {"selected", sel},
                                  {"arcs", std::move(arcs)}});
    }

    HttpResponse history(const std::string& dest) const {
        std::shared_lock lock(mu_);
        require_dest(dest);
        auto it = history_.find(dest);
        return {200, {{"dest_id", dest}, {"rounds", it == history_.end() ? json::array() : json(it->second)}}};
    }

    const ServiceModels& require_models() const {
        if (!models_) throw ApiError(503, "model_unavailable", "no fitted models are loaded");
        return *models_;
    }

    HttpResponse node_geosig(const std::string& id, const std::map<std::string, std::string>& query) const {
        const auto& m = require_models();
        const GeoNode* node = m.nodes.origins.find(id);
        std::string domain = node ? "oD" : "dD";
        if (!node) node = m.nodes.destinations.find(id);
        if (!node) throw ApiError(404, "unknown_node", "unknown node '" + id + "'");
        if (auto it = query.find("domain"); it != query.end()) domain = it->second;
        const NodeSet* reference = nullptr;
        if (domain == "oD" || domain == "dD") reference = &m.nodes.destinations;
        else if (domain == "oO") reference = &m.nodes.origins;
        else throw ApiError(400, "invalid_domain", "domain must be oO, oD or dD");
        const auto g = geosig(*node, *reference, m.signatures.grid, m.signatures.geosig);
        json peaks = json::array();
        for (std::size_t k = 0; k < g.peaks.size(); ++k)
            peaks.push_back({{"direction", k < kDirections ? kDirectionNames[k] : std::to_string(k)},
                             {"value", g.peaks[k].value},
                             {"r_bin", g.peaks[k].r_bin}});
        return {200,
                {{"node_id", id},
                 {"domain", domain},
                 {"mask_max", m.signatures.geosig.mask_max},
                 {"r_step", m.signatures.grid.r_step},
                 {"peaks", std::move(peaks)},
                 {"flat", g.flat()}}};
    }

    HttpResponse whatif_hub(const std::string& raw) const {
        const auto& m = require_models();
        const auto req = parse_whatif_request(parse_body(raw), cfg_.hub_origin_id, cfg_.whatif_episodes);
        std::shared_lock lock(mu_);
        return {200, whatif_hub_report(m, state_, req)};
    }

    SessionConfig cfg_;
    std::shared_ptr<const ServiceModels> models_;
    std::vector<std::string> warnings_;
    std::unique_ptr<EventLog> log_;

    mutable std::shared_mutex mu_;  // state_, history_, log_ appends
    BanditState state_;
    std::map<std::string, std::vector<json>> history_;

    mutable std::mutex pending_mu_;  // taken after mu_
    std::map<std::string, Pending> pending_;
};

// cpp-httplib front end for an ApiSession.
class HttpServer {
public:
    explicit HttpServer(ApiSession& session) : session_(session) {
        auto handler = [this](const httplib::Request& req, httplib::Response& res) {
            HttpRequest r;
            r.method = req.method;
            r.path = req.path;
            for (const auto& [k, v] : req.params) r.query.emplace(k, v);
            r.body = req.body;
            r.authorization = req.get_header_value("Authorization");
            const auto out = session_.handle(r);
            res.status = out.status;
            res.set_content(out.body.dump(), "application/json");
        };
        server_.Get(R"(/.*)", handler);
        server_.Post(R"(/.*)", handler);
        server_.Delete(R"(/.*)", handler);
    }
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;
    ~HttpServer() { stop(); }

    // Port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port) {
        if (port == 0) port_ = server_.bind_to_any_port(host);
        else port_ = server_.bind_to_port(host, port) ? port : -1;
        if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        return port_;
    }

    void run() { server_.listen_after_bind(); }  // blocks until stop()

    void start() {
        thread_ = std::thread([this] { run(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }

private:
    ApiSession& session_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace geonet
