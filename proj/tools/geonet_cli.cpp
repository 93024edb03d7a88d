// geonet: batch entry points over the header-only library.
//
// Exit codes: 0 success, 2 usage or configuration, 3 bad input data,
// 4 numeric failure, 1 anything else.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geonet/config.hpp"
#include "geonet/datastore.hpp"
#include "geonet/flowmodel.hpp"
#include "geonet/ranker.hpp"
#include "geonet/simharness.hpp"
#include "geonet/spectra.hpp"
// After the Eigen users; see service.hpp.
#include "geonet/service.hpp"

namespace fs = std::filesystem;
using namespace geonet;

namespace {

const std::set<std::string> kConfigKeys{
    "seed",           "k",                 "mode",
    "model",          "variant",           "variants",
    "gbrt.iterations", "gbrt.learning_rate", "gbrt.max_depth",
    "gbrt.min_leaf",  "geosig.mask_max",
    "network.n_fc",   "network.n_dest",    "network.weeks",
    "network.noise_sd", "network.mean_demand",
    "bandit.alpha0",  "bandit.beta0",      "bandit.bootstrap",
    "simulate.seeds", "simulate.threads",  "simulate.policy",
    "simulate.m",     "simulate.k_rule",   "simulate.ranks",
    "simulate.from_list_only", "simulate.refresh_ranks",
    "fixture.n_origins", "fixture.n_dests",
    "whatif.episodes", "whatif.sw_max",
    "serve.host",     "serve.log",         "serve.k_rule",
};

constexpr const char* kPortEnv = "GEONET_PORT";
constexpr const char* kTokenEnv = "GEONET_TOKEN";

// Flags shared by every subcommand; a set flag overrides the config file.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> k;
    std::optional<std::string> mode;

    Config cfg;

    void add_to(CLI::App* sub) {
        sub->add_option("--config", config, "Versioned key-value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Random seed (base seed for simulate)");
        sub->add_option("--out", out, "Output file or directory");
        sub->add_option("--k", k, "Arcs per recommendation round")->check(CLI::PositiveNumber);
        sub->add_option("--mode", mode, "Feedback mode")->check(CLI::IsMember({"not_selected", "any_recommended"}));
    }

    void load() {
        if (!config.empty()) {
            cfg = Config::load(config);
            cfg.require_known(kConfigKeys);
        }
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (k) cfg.set("k", std::to_string(*k));
        if (mode) cfg.set("mode", *mode);
    }

    std::uint64_t seed_or(std::uint64_t fallback) const {
        const auto v = cfg.integer("seed", static_cast<long long>(fallback));
        if (v < 0) throw config_error("seed must be >= 0");
        return static_cast<std::uint64_t>(v);
    }

    FeedbackMode feedback_mode() const {
        try {
            return parse_feedback_mode(cfg.get("mode", "not_selected"));
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
    }

    GbrtConfig gbrt(int iterations = 200) const {
        GbrtConfig g;
        g.n_iterations = static_cast<int>(cfg.integer("gbrt.iterations", iterations));
        g.learning_rate = cfg.number("gbrt.learning_rate", 0.1);
        g.max_depth = static_cast<int>(cfg.integer("gbrt.max_depth", 3));
        g.min_samples_leaf = static_cast<int>(cfg.integer("gbrt.min_leaf", 1));
        return g;
    }
};

template <class F>
auto as_config(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
}

// Writes to `path`, or stdout for "" and "-".
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    write(out);
    if (!out.flush()) throw data_error("write failed for '" + path + "'");
}

PlantedFlowData planted(const Common& c) {
    PlantedFlowConfig pc;
    pc.seed = c.seed_or(pc.seed);
    pc.n_origins = static_cast<int>(c.cfg.integer("fixture.n_origins", pc.n_origins));
    pc.n_dests = static_cast<int>(c.cfg.integer("fixture.n_dests", pc.n_dests));
    return planted_flow_fixture(pc);
}

// Training and test rows from files, or from the planted fixture.
struct TrainTest {
    std::string train, test;
    bool fixture = false;

    void add_to(CLI::App* sub) {
        sub->add_option("--train", train, "Training arcs CSV")->check(CLI::ExistingFile);
        sub->add_option("--test", test, "Test arcs CSV")->check(CLI::ExistingFile);
        sub->add_flag("--fixture", fixture, "Use the planted-signal synthetic fixture (seeded by --seed)");
    }

    PlantedFlowData load(const Common& c) const {
        if (fixture) return planted(c);
        if (train.empty() || test.empty()) throw config_error("need --train and --test, or --fixture");
        return {read_arcs_csv(train), read_arcs_csv(test)};
    }
};

// Writes the planted fixture as train.csv (week 0) and test.csv (week 1).
int export_fixture(Common& c) {
    const auto data = planted(c);
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    emit((dir / "train.csv").string(), [&](std::ostream& o) { write_arcs_csv(o, data.train); });
    emit((dir / "test.csv").string(), [&](std::ostream& o) { write_arcs_csv(o, data.test); });
    std::cout << "train " << data.train.size() << " test " << data.test.size() << '\n';
    return 0;
}

int run_ingest(Common& c, const std::string& arcs_path, bool fixture) {
    if (fixture) return export_fixture(c);
    if (arcs_path.empty()) throw config_error("need --arcs or --fixture");
    auto arcs = ingest_arcs(arcs_path);
    std::sort(arcs.begin(), arcs.end(), [](const ArcRecord& a, const ArcRecord& b) {
        return std::tie(a.week, a.dest_id, a.origin_id) < std::tie(b.week, b.dest_id, b.origin_id);
    });
    for (std::size_t i = 1; i < arcs.size(); ++i)
        if (arcs[i].week == arcs[i - 1].week && arcs[i].dest_id == arcs[i - 1].dest_id &&
            arcs[i].origin_id == arcs[i - 1].origin_id)
            throw data_error("duplicate arc " + arcs[i].origin_id + "->" + arcs[i].dest_id + " in week " +
                             std::to_string(arcs[i].week));
    const auto nodes = nodes_from_arcs(arcs);
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    emit((dir / "arcs.csv").string(), [&](std::ostream& o) { write_arcs_csv(o, arcs); });
    emit((dir / "origins.csv").string(), [&](std::ostream& o) { write_nodes_csv(o, nodes.origins); });
    emit((dir / "destinations.csv").string(), [&](std::ostream& o) { write_nodes_csv(o, nodes.destinations); });
    std::set<int> weeks;
    for (const auto& a : arcs) weeks.insert(a.week);
    std::cout << "arcs " << arcs.size() << " weeks " << weeks.size() << " origins " << nodes.origins.nodes.size()
              << " destinations " << nodes.destinations.nodes.size() << '\n';
    return 0;
}

struct GeosigArgs {
    std::string arcs, origins, set, domain = "oD", pgm_dir;
    std::optional<int> mask_max;
};

int run_geosig(Common& c, const GeosigArgs& g) {
    NodeSet subjects, reference;
    if (!g.arcs.empty()) {
        const auto nodes = nodes_from_arcs(read_arcs_csv(g.arcs));
        if (g.domain == "oO") subjects = reference = nodes.origins;
        else if (g.domain == "oD") subjects = nodes.origins, reference = nodes.destinations;
        else if (g.domain == "dD") subjects = reference = nodes.destinations;
        else throw config_error("--domain must be oO, oD or dD");
    } else if (!g.origins.empty() && !g.set.empty()) {
        subjects = read_nodes_csv(g.origins);
        reference = read_nodes_csv(g.set);
    } else {
        throw config_error("need --arcs, or --origins and --set");
    }
    validate(subjects);
    validate(reference);
    GeosigOptions opts;
    opts.mask_max = g.mask_max.value_or(static_cast<int>(c.cfg.integer("geosig.mask_max", 2)));
    if (opts.mask_max < 0) throw config_error("mask_max must be >= 0");
    const auto grid = PolarGrid::us_preset();
    emit(c.out, [&](std::ostream& o) {
        write_geosig_csv_header(o, grid.theta_bins);
        for (const auto& n : subjects.nodes) write_geosig_csv_row(o, n.id, geosig(n, reference, grid, opts));
    });
    if (!g.pgm_dir.empty()) {
        fs::create_directories(g.pgm_dir);
        for (const auto& n : subjects.nodes) {
            const auto polar = polar_matrix(n, reference, grid);
            const auto mag = magnitude_spectrum(triangular_mask(fft2d(polar), opts.mask_max));
            emit((fs::path(g.pgm_dir) / (n.id + "_polar.pgm")).string(), [&](std::ostream& o) { write_pgm(o, polar.values); });
            emit((fs::path(g.pgm_dir) / (n.id + "_spectrum.pgm")).string(), [&](std::ostream& o) { write_pgm(o, mag); });
        }
    }
    return 0;
}

struct FitArgs {
    std::string arcs, test, variant, model;
};

int run_fit(Common& c, const FitArgs& a) {
    const auto variant = as_config([&] { return parse_variant(a.variant.empty() ? c.cfg.get("variant", "d") : a.variant); });
    const auto kind = as_config([&] { return parse_model_kind(a.model.empty() ? c.cfg.get("model", "linear") : a.model); });
    const auto train = read_arcs_csv(a.arcs);
    const auto test = a.test.empty() ? std::vector<ArcRecord>{} : read_arcs_csv(a.test);
    const auto sigs = domain_signatures(nodes_from_arcs(train));
    const auto target = variant == FeatureVariant::cost ? Target::cost_per_pkg : Target::packages;
    const auto report = evaluate_variant(train, test, sigs, variant, kind, target, c.gbrt());
    write_report(std::cout, {report});
    if (!c.out.empty()) {
        const auto ds = build_dataset(train, sigs, variant, target);
        save_model(c.out, ModelArtifact{variant, fit_model(ds, kind, c.gbrt())});
    }
    return 0;
}

std::vector<FeatureVariant> parse_variants(const std::string& list) {
    std::vector<FeatureVariant> out;
    std::stringstream ss(list);
    for (std::string v; std::getline(ss, v, ',');)
        if (!v.empty()) out.push_back(as_config([&] { return parse_variant(v); }));
    if (out.empty()) throw config_error("no variants given");
    return out;
}

int run_evaluate(Common& c, const TrainTest& tt, const std::string& variants, const std::string& model) {
    const auto kind = as_config([&] { return parse_model_kind(model.empty() ? c.cfg.get("model", "linear") : model); });
    const auto list = parse_variants(variants.empty() ? c.cfg.get("variants", "null,a,b,c,d") : variants);
    const auto data = tt.load(c);
    const auto rows = evaluate_variants(data.train, data.test, list, kind, Target::packages, c.gbrt());
    write_report(std::cout, rows);
    if (!c.out.empty()) emit(c.out, [&](std::ostream& o) { write_report_csv(o, rows); });
    return 0;
}

int run_rank(Common& c, const std::string& model_path, const std::string& arcs_path, const std::string& sig_arcs,
             std::optional<int> week) {
    const auto artifact = load_model(model_path);
    if (artifact.variant != FeatureVariant::cost) throw config_error("rank needs a cost-variant model");
    const auto arcs = read_arcs_csv(arcs_path);
    if (arcs.empty()) throw data_error("no arcs in '" + arcs_path + "'");
    const auto sigs = domain_signatures(nodes_from_arcs(sig_arcs.empty() ? arcs : read_arcs_csv(sig_arcs)));
    int w = week.value_or(arcs.front().week);
    if (!week)
        for (const auto& a : arcs) w = std::max(w, a.week);
    std::vector<ArcRecord> rows;
    for (const auto& a : arcs)
        if (a.week == w) rows.push_back(a);
    if (rows.empty()) throw data_error("no arcs in week " + std::to_string(w));
    const auto preds = std::visit([&](const auto& m) { return predict_costs(m, rows, sigs); }, artifact.model);
    if (preds.clamped) std::cerr << "warning: " << preds.clamped << " negative predicted costs clamped to 0\n";
    const auto tables = rank_all(preds.costs, w);
    emit(c.out, [&](std::ostream& o) { write_rankings_csv(o, tables); });
    return 0;
}

StudyConfig study_config(const Common& c) {
    StudyConfig s;
    auto& n = s.network;
    n.n_fc = static_cast<int>(c.cfg.integer("network.n_fc", 20));
    n.n_dest = static_cast<int>(c.cfg.integer("network.n_dest", 5));
    n.weeks = static_cast<int>(c.cfg.integer("network.weeks", 8));
    n.noise_sd = c.cfg.number("network.noise_sd", n.noise_sd);
    n.mean_demand = c.cfg.number("network.mean_demand", n.mean_demand);
    as_config([&] {
        validate(n);
        return 0;
    });
    s.policy.kind = as_config([&] { return parse_policy_kind(c.cfg.get("simulate.policy", "true_cost_top_m")); });
    s.policy.m = static_cast<int>(c.cfg.integer("simulate.m", 5));
    s.policy.from_list_only = c.cfg.boolean("simulate.from_list_only", false);
    s.episode.weeks = n.weeks;
    s.episode.k = static_cast<int>(c.cfg.integer("k", 10));
    if (s.episode.k < 1) throw config_error("k must be >= 1");
    const auto k_rule = c.cfg.get("simulate.k_rule", "fixed_k");
    if (k_rule == "fixed_k") s.episode.k_rule = KRule::fixed_k;
    else if (k_rule == "expected_kj") s.episode.k_rule = KRule::expected_kj;
    else throw config_error("simulate.k_rule must be fixed_k or expected_kj");
    s.episode.mode = c.feedback_mode();
    s.episode.bootstrap_first_round = c.cfg.boolean("bandit.bootstrap", false);
    s.episode.refresh_ranks = c.cfg.boolean("simulate.refresh_ranks", true);
    const auto ranks = c.cfg.get("simulate.ranks", "cost_model");
    if (ranks == "cost_model") s.ranks = RankSource::cost_model;
    else if (ranks == "true_cost") s.ranks = RankSource::true_cost;
    else throw config_error("simulate.ranks must be cost_model or true_cost");
    s.gbrt = c.gbrt(200);
    s.alpha0 = c.cfg.number("bandit.alpha0", 0.1);
    s.beta0 = c.cfg.number("bandit.beta0", 1.0);
    return s;
}

std::string utc_now() { return detail::utc_timestamp(); }

int run_simulate(Common& c, std::optional<int> seeds_flag, std::optional<unsigned> threads_flag) {
    const auto cfg = study_config(c);
    const int n = seeds_flag.value_or(static_cast<int>(c.cfg.integer("simulate.seeds", 100)));
    if (n < 1) throw config_error("--seeds must be >= 1");
    const unsigned threads = threads_flag.value_or(
        static_cast<unsigned>(c.cfg.integer("simulate.threads", std::max(1u, std::thread::hardware_concurrency()))));
    const auto base = c.seed_or(1);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));

    std::vector<EpisodeLog> logs;
    const auto metrics = run_study(cfg, seeds, threads, &logs);
    const fs::path dir = c.out.empty() ? fs::path("simulate_out") : fs::path(c.out);
    emit((dir / "metrics.csv").string(), [&](std::ostream& o) { write_metrics_csv(o, metrics); });
    // Every seed's series in seed order, each row prefixed with its seed.
    emit((dir / "series.csv").string(), [&](std::ostream& o) {
        for (std::size_t i = 0; i < logs.size(); ++i) {
            std::ostringstream s;
            write_series_csv(s, logs[i]);
            std::istringstream in(s.str());
            std::string line;
            std::getline(in, line);
            if (i == 0) o << "seed," << line << '\n';
            while (std::getline(in, line)) o << logs[i].seed << ',' << line << '\n';
        }
    });
    // Timestamps live only in the sidecar so the CSVs are reproducible byte for byte.
    emit((dir / "run_meta.json").string(), [&](std::ostream& o) {
        o << json{{"generated_at", utc_now()}, {"seeds", n}, {"base_seed", base}, {"config", c.cfg.values()}}.dump(1)
          << '\n';
    });
    int passed = 0;
    for (const auto& m : metrics) passed += m.passed;
    std::cout << "seeds " << n << " passed " << passed << " (" << 100.0 * passed / n << "%)\n";
    return 0;
}

ServiceModels models_from(const Common& c, const TrainTest& tt) {
    const auto data = tt.load(c);
    const auto kind = as_config([&] { return parse_model_kind(c.cfg.get("model", "gbrt")); });
    return build_service_models(data.train, data.test, kind, c.gbrt(200));
}

BanditState state_from(const Common& c, const ServiceModels& m, const std::string& snapshot_path) {
    if (!snapshot_path.empty()) return restore(snapshot_path);
    std::vector<std::string> origins, dests;
    for (const auto& o : m.nodes.origins.nodes) origins.push_back(o.id);
    for (const auto& [d, t] : m.ranks) dests.push_back(d);
    return init_state(origins, dests, rankpct_table(m.ranks), c.cfg.number("bandit.alpha0", 0.1),
                      c.cfg.number("bandit.beta0", 1.0));
}

struct WhatIfArgs {
    double lat = 0.0, lon = 0.0, fraction = 0.25;
    std::optional<double> sw_max, distance;
    std::optional<int> episodes;
    std::string dest, state;
};

int run_whatif(Common& c, const TrainTest& tt, const WhatIfArgs& w) {
    const auto models = models_from(c, tt);
    const auto state = state_from(c, models, w.state);
    json body{{"lat", w.lat}, {"lon", w.lon}, {"fraction", w.fraction}, {"seed", c.seed_or(0)}};
    json means = json::object();
    if (w.sw_max || c.cfg.has("whatif.sw_max")) means["sw_max"] = w.sw_max.value_or(c.cfg.number("whatif.sw_max", 800.0));
    if (w.distance) means["distance"] = *w.distance;
    if (!means.empty()) body["means"] = means;
    if (!w.dest.empty()) body["dest_id"] = w.dest;
    const auto req = parse_whatif_request(body, "HUB", w.episodes.value_or(static_cast<int>(c.cfg.integer("whatif.episodes", 200))));
    const auto report = whatif_hub_report(models, state, req);
    emit(c.out, [&](std::ostream& o) { o << report.dump(1) << '\n'; });
    return 0;
}

struct ServeArgs {
    std::string state, log, host;
    std::string k_rule;
};

int run_serve(Common& c, const TrainTest& tt, const ServeArgs& s) {
    std::shared_ptr<const ServiceModels> models;
    if (tt.fixture || !tt.train.empty()) models = std::make_shared<const ServiceModels>(models_from(c, tt));
    if (!models && s.state.empty()) throw config_error("serve needs --state, or model inputs (--train/--test or --fixture)");
    auto state = models ? state_from(c, *models, s.state) : restore(s.state);

    SessionConfig sc;
    sc.mode = c.feedback_mode();
    sc.bootstrap_first_round = c.cfg.boolean("bandit.bootstrap", false);
    const auto rule = s.k_rule.empty() ? c.cfg.get("serve.k_rule", c.cfg.has("k") ? "fixed_k" : "expected_kj") : s.k_rule;
    if (rule == "fixed_k") sc.k_rule = KRule::fixed_k;
    else if (rule == "expected_kj") sc.k_rule = KRule::expected_kj;
    else throw config_error("k rule must be fixed_k or expected_kj");
    sc.fixed_k = static_cast<int>(c.cfg.integer("k", 10));
    sc.whatif_episodes = static_cast<int>(c.cfg.integer("whatif.episodes", 200));
    if (const char* tok = std::getenv(kTokenEnv)) sc.token = tok;

    int port = 8080;
    if (const char* p = std::getenv(kPortEnv)) {
        try {
            port = std::stoi(p);
        } catch (const std::exception&) {
            throw config_error(std::string(kPortEnv) + " must be a port number");
        }
    }
    const auto log_path = s.log.empty() ? c.cfg.get("serve.log", "events.jsonl") : s.log;
    const auto host = s.host.empty() ? c.cfg.get("serve.host", "127.0.0.1") : s.host;

    // Block the stop signals before any thread exists; a waiter thread stops the server.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    ApiSession session(std::move(state), log_path, sc, models);
    for (const auto& w : session.startup_warnings()) std::cerr << "warning: " << w << '\n';
    HttpServer server(session);
    const int bound = server.bind(host, port);
    std::cerr << "serving /v1 on http://" << host << ':' << bound << " (log " << log_path << ")\n";
    std::atomic<bool> signalled{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&stop_signals, &sig);
        signalled = true;
        server.stop();
    });
    server.run();
    if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    if (!c.out.empty()) snapshot(session.state(), c.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geonet: geosig features, arc-cost ranking and arc recommendation"};
    app.require_subcommand(1);
    app.footer(std::string("Environment: ") + kPortEnv + " sets the serve port (default 8080); " + kTokenEnv +
               " enables bearer-token auth for serve.\nExit codes: 0 ok, 2 usage, 3 data, 4 numeric.");

    Common common;
    TrainTest tt;

    auto* ingest = app.add_subcommand("ingest", "Validate arc CSV; write normalized arcs and node tables to --out dir");
    std::string ingest_arcs_path;
    bool ingest_fixture = false;
    ingest->add_option("--arcs", ingest_arcs_path, "Arc CSV")->check(CLI::ExistingFile);
    ingest->add_flag("--fixture", ingest_fixture, "Instead write the planted fixture as train.csv and test.csv");
    common.add_to(ingest);

    auto* geo = app.add_subcommand("geosig", "Per-node geosig CSV (optionally PGM bitmaps)");
    GeosigArgs geo_args;
    geo->add_option("--arcs", geo_args.arcs, "Arc CSV; nodes come from its endpoints")->check(CLI::ExistingFile);
    geo->add_option("--domain", geo_args.domain, "oO, oD or dD (with --arcs)")->check(CLI::IsMember({"oO", "oD", "dD"}));
    geo->add_option("--origins", geo_args.origins, "Node CSV of subjects (id,lat,lon,measure)")->check(CLI::ExistingFile);
    geo->add_option("--set", geo_args.set, "Node CSV of the reference set")->check(CLI::ExistingFile);
    geo->add_option("--mask-max", geo_args.mask_max, "Triangular mask size");
    geo->add_option("--pgm-dir", geo_args.pgm_dir, "Write polar and spectrum PGMs here");
    common.add_to(geo);

    auto* fit = app.add_subcommand("fit", "Fit one variant; print its report row; save the model to --out");
    FitArgs fit_args;
    fit->add_option("--arcs", fit_args.arcs, "Training arc CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--test", fit_args.test, "Optional test arc CSV for test MAPE")->check(CLI::ExistingFile);
    fit->add_option("--variant", fit_args.variant, "null|a|b|c|d|cost")
        ->check(CLI::IsMember({"null", "a", "b", "c", "d", "cost"}));
    fit->add_option("--model", fit_args.model, "linear|gbrt")->check(CLI::IsMember({"linear", "gbrt"}));
    common.add_to(fit);

    auto* eval = app.add_subcommand("evaluate", "Adjusted R2 and MAPE report across variants");
    std::string eval_variants, eval_model;
    tt.add_to(eval);
    eval->add_option("--variants", eval_variants, "Comma list, default null,a,b,c,d");
    eval->add_option("--model", eval_model, "linear|gbrt")->check(CLI::IsMember({"linear", "gbrt"}));
    common.add_to(eval);

    auto* rank = app.add_subcommand("rank", "Rank arcs per destination by predicted cost");
    std::string rank_model, rank_arcs_path, rank_sig_arcs;
    std::optional<int> rank_week;
    rank->add_option("--model", rank_model, "Cost-variant model JSON from fit")->required()->check(CLI::ExistingFile);
    rank->add_option("--arcs", rank_arcs_path, "Arc CSV to rank")->required()->check(CLI::ExistingFile);
    rank->add_option("--sig-arcs", rank_sig_arcs, "Arcs that define the geosig node sets (default --arcs)")
        ->check(CLI::ExistingFile);
    rank->add_option("--week", rank_week, "Week to rank (default: latest)");
    common.add_to(rank);

    auto* sim = app.add_subcommand("simulate", "Seeded bandit study; writes metrics.csv, series.csv, run_meta.json");
    std::optional<int> sim_seeds;
    std::optional<unsigned> sim_threads;
    sim->add_option("--seeds", sim_seeds, "Number of seeds, starting at --seed (default 1)");
    sim->add_option("--threads", sim_threads, "Worker threads");
    common.add_to(sim);

    auto* whatif = app.add_subcommand("whatif-hub", "Hub experiment deltas and new-arc proximity as JSON");
    WhatIfArgs wi;
    tt.add_to(whatif);
    whatif->add_option("--lat", wi.lat, "Hub latitude")->required();
    whatif->add_option("--lon", wi.lon, "Hub longitude")->required();
    whatif->add_option("--fraction", wi.fraction, "Share of test rows to replace, in [0, 1]");
    whatif->add_option("--sw-max", wi.sw_max, "Mean SW max flow for replaced rows");
    whatif->add_option("--distance", wi.distance, "Mean arc distance (degrees) for replaced rows");
    whatif->add_option("--dest", wi.dest, "Destination for the proximity report");
    whatif->add_option("--episodes", wi.episodes, "Proximity sampling episodes");
    whatif->add_option("--state", wi.state, "Bandit snapshot (default: priors)")->check(CLI::ExistingFile);
    common.add_to(whatif);

    auto* serve = app.add_subcommand("serve", "HTTP /v1 API; port from GEONET_PORT; --out writes a snapshot on exit");
    ServeArgs sv;
    tt.add_to(serve);
    serve->add_option("--state", sv.state, "Bandit snapshot to start from")->check(CLI::ExistingFile);
    serve->add_option("--log", sv.log, "Event log (default events.jsonl)");
    serve->add_option("--host", sv.host, "Bind address (default 127.0.0.1)");
    serve->add_option("--k-rule", sv.k_rule, "Rule when a request omits k")
        ->check(CLI::IsMember({"fixed_k", "expected_kj"}));
    common.add_to(serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        common.load();
        if (ingest->parsed()) return run_ingest(common, ingest_arcs_path, ingest_fixture);
        if (geo->parsed()) return run_geosig(common, geo_args);
        if (fit->parsed()) return run_fit(common, fit_args);
        if (eval->parsed()) return run_evaluate(common, tt, eval_variants, eval_model);
        if (rank->parsed()) return run_rank(common, rank_model, rank_arcs_path, rank_sig_arcs, rank_week);
        if (sim->parsed()) return run_simulate(common, sim_seeds, sim_threads);
        if (whatif->parsed()) return run_whatif(common, tt, wi);
        if (serve->parsed()) return run_serve(common, tt, sv);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ApiError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.status >= 500 ? 1 : 2;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::logic_error& e) {  // invalid values and unknown ids in the inputs
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
