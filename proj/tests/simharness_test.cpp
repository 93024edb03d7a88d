#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "geonet/simharness.hpp"

using namespace geonet;

namespace {

EpisodeData true_cost_data(const SyntheticNetwork& net) { return episode_data(net, RankSource::true_cost); }

BanditState state_for(const SyntheticNetwork& net, const EpisodeData& data) {
    std::vector<std::string> fcs, dests;
    for (const auto& n : net.fcs) fcs.push_back(n.id);
    for (const auto& n : net.dests) dests.push_back(n.id);
    return init_state(fcs, dests, rankpct_table(data.weekly_ranks.front()));
}

}  // namespace

TEST(GenerateNetwork, DeterministicAndSized) {
    SyntheticNetworkConfig cfg;
    cfg.seed = 11;
    std::ostringstream a, b;
    write_arcs_csv(a, generate_network(cfg).arcs);
    write_arcs_csv(b, generate_network(cfg).arcs);
    EXPECT_EQ(a.str(), b.str());
    cfg.seed = 12;
    std::ostringstream c;
    write_arcs_csv(c, generate_network(cfg).arcs);
    EXPECT_NE(a.str(), c.str());

    SyntheticNetworkConfig full;
    full.n_fc = 71;
    full.n_dest = 232;
    full.weeks = 8;
    const auto net = generate_network(full);
    EXPECT_EQ(net.arcs.size(), 8u * 71u * 232u);
    for (const auto& r : net.arcs) {
        ASSERT_GE(r.packages, 0.0);
        ASSERT_GE(r.cost_per_pkg, 0.0);
    }
    EXPECT_LT(with_flow(net.arcs).size(), net.arcs.size());
    EXPECT_EQ(net.fcs.front().id, "FC00");
    EXPECT_EQ(net.dests.back().id, "D231");
}

TEST(GenerateNetwork, NoiselessCostIsAffineInDistance) {
    SyntheticNetworkConfig cfg;
    cfg.noise_sd = 0.0;
    cfg.n_fc = 6;
    cfg.n_dest = 7;
    const auto net = generate_network(cfg);
    for (const auto& a : net.arcs) ASSERT_DOUBLE_EQ(a.cost_per_pkg, cfg.base_cost + cfg.distance_coef * a.distance());

    SyntheticNetworkConfig degenerate = cfg;
    degenerate.clusters = {{35.0, -95.0, 0.0}};
    EXPECT_NO_THROW(generate_network(degenerate));
    degenerate.n_fc = 0;
    EXPECT_THROW(generate_network(degenerate), std::invalid_argument);
}

TEST(RunEpisode, FixedSetCountsSelections) {
    SyntheticNetworkConfig cfg;
    cfg.n_fc = 12;
    cfg.n_dest = 3;
    const auto net = generate_network(cfg);
    const auto data = true_cost_data(net);
    OperatorPolicy pol;
    pol.kind = OperatorPolicy::Kind::fixed_set;
    for (const auto& d : net.dests) pol.fixed[d.id] = {"FC01", "FC04", "FC07"};
    EpisodeConfig ep;
    ep.k = 5;
    ep.weeks = 6;
    auto log = run_episode(state_for(net, data), data, pol, ep);
    EXPECT_EQ(log.entries.size(), 18u);
    EXPECT_EQ(log.series.size(), 18u * 12u);
    for (const auto& d : net.dests)
        for (const auto& o : pol.fixed[d.id]) {
            EXPECT_EQ(log.final_state.at(d.id, o).alpha_micro, to_micro(0.1 + 6)) << d.id << ' ' << o;
        }

    auto s = convergence_summary(log);
    EXPECT_TRUE(s.untouched_at_prior);
    for (int dd = 0; dd < log.final_state.n_dest(); ++dd)
        for (int i = 0; i < log.final_state.n_fc(); ++i) {
            const auto& p = log.final_state.at(dd, i);
            ASSERT_GT(p.alpha_micro, 0);
            ASSERT_GT(p.beta_micro, 0);
        }

    ep.weeks = 0;
    auto empty = run_episode(state_for(net, data), data, pol, ep);
    EXPECT_TRUE(empty.entries.empty());
    EXPECT_EQ(empty.final_state, empty.initial);
}

TEST(RunEpisode, UnknownSelectionIsAnError) {
    SyntheticNetworkConfig cfg;
    cfg.n_fc = 4;
    cfg.n_dest = 1;
    const auto net = generate_network(cfg);
    const auto data = true_cost_data(net);
    OperatorPolicy pol;
    pol.kind = OperatorPolicy::Kind::fixed_set;
    pol.fixed[net.dests[0].id] = {"NOT_AN_FC"};
    EXPECT_THROW(run_episode(state_for(net, data), data, pol, {}), unknown_id_error);
}

TEST(RunEpisode, StableSetDominatesRecommendations) {
    // S = the top-rankpct arcs; by week 20 they should almost always be shown.
    SyntheticNetworkConfig cfg;
    cfg.n_fc = 20;
    cfg.n_dest = 1;
    cfg.weeks = 20;
    std::size_t shown = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        cfg.seed = seed;
        const auto net = generate_network(cfg);
        const auto data = true_cost_data(net);
        OperatorPolicy pol;
        pol.kind = OperatorPolicy::Kind::fixed_set;
        const auto& table = data.weekly_ranks[0].begin()->second;
        pol.fixed[table.dest_id] = {table.order.begin(), table.order.begin() + 4};
        EpisodeConfig ep;
        ep.k = 6;
        ep.weeks = 20;
        ep.seed = seed;
        auto log = run_episode(state_for(net, data), data, pol, ep);
        const auto& last = log.entries.back().round.recommended;
        for (const auto& o : pol.fixed[table.dest_id]) {
            shown += std::count(last.begin(), last.end(), o);
            ++total;
        }
    }
    EXPECT_GE(static_cast<double>(shown) / total, 0.9);
}

TEST(RunEpisode, ExpectedArcsTracksStableSelectionCount) {
    SyntheticNetworkConfig cfg;
    cfg.n_fc = 20;
    cfg.n_dest = 2;
    cfg.weeks = 20;
    cfg.seed = 5;
    const auto net = generate_network(cfg);
    const auto data = true_cost_data(net);
    OperatorPolicy pol;  // top-5 by true cost, always connected
    EpisodeConfig ep;
    ep.weeks = 20;
    ep.k_rule = KRule::expected_kj;
    auto log = run_episode(state_for(net, data), data, pol, ep);
    double mean = 0.0, sd = 0.0;
    for (const auto& e : log.entries) {
        mean += e.expected.mean;
        sd += e.expected.sd;
        EXPECT_EQ(e.selected.size(), 5u);
        EXPECT_GE(e.round.k, 1);
    }
    mean /= log.entries.size();
    sd /= log.entries.size();
    EXPECT_LE(std::abs(mean - 5.0), 3.0 * sd);
}

TEST(Convergence, DesktopStudyAndThreadDeterminism) {
    StudyConfig cfg;
    cfg.network.n_fc = 20;
    cfg.network.n_dest = 3;
    cfg.episode.k = 10;
    cfg.episode.weeks = 6;
    std::vector<std::uint64_t> seeds{3, 1, 4, 1, 5, 9, 2, 6};
    std::vector<EpisodeLog> logs;
    auto seq = run_study(cfg, seeds, 1, &logs);
    auto par = run_study(cfg, seeds, 4);
    ASSERT_EQ(seq.size(), par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_EQ(seq[i].seed, seeds[i]);
        EXPECT_EQ(seq[i].tracked, par[i].tracked);
        EXPECT_EQ(seq[i].converged, par[i].converged);
        EXPECT_EQ(seq[i].mean_expected_arcs, par[i].mean_expected_arcs);
        EXPECT_EQ(logs[i].final_state, run_seed(cfg, seeds[i]).final_state);
    }
    EXPECT_EQ(logs[1].final_state, logs[3].final_state);
}

TEST(Convergence, SummaryCountsByHand) {
    // One destination, two arcs; FC00 selected every week with rankpct 0.9.
    auto s = init_state({"FC00", "FC01", "FC02"}, {"D"}, {{"D", {{"FC00", 0.9}, {"FC01", 0.6}, {"FC02", 0.1}}}});
    EpisodeLog log;
    log.initial = s;
    for (int w = 0; w < 4; ++w) {
        WeekEntry e;
        e.week = w;
        e.round.dest_id = "D";
        e.round.t = w;
        e.round.recommended = {"FC00", "FC01"};
        e.round.theta_tilde.assign(3, 0.0);
        e.selected = {"FC00", "FC01"};
        apply_feedback(s, e.round, e.selected);
        for (int i = 0; i < 3; ++i)
            log.series.push_back({w, "D", s.origins[i], s.at(0, i).rankpct, s.at(0, i).mean(), 0.0});
        log.entries.push_back(e);
    }
    log.final_state = s;
    auto c = convergence_summary(log);
    EXPECT_EQ(c.tracked, 2u);
    // FC00: 0.9 * 1.1/2.1 > 0.5 after week 0. FC01: 0.6 * 4.1/5.1 = 0.482 < 0.5.
    EXPECT_EQ(c.converged, 1u);
    EXPECT_EQ(c.untouched, 1u);
    EXPECT_TRUE(c.untouched_at_prior);
    EXPECT_FALSE(c.passed());
}

TEST(WhatIf, CopiesNearestPosteriorAndReportsPosition) {
    auto s = init_state(6, 1);
    const std::string dest = s.dests[0];
    std::map<std::string, std::vector<double>> feats;
    for (int i = 0; i < 6; ++i) {
        s.at(0, i).rankpct = rank_percentile(i, 6);
        feats[s.origins[i]] = {static_cast<double>(i), 10.0 * i};
    }
    // FC00 has been selected for ten rounds.
    for (int t = 0; t < 10; ++t) apply_feedback(s, dest, t, {"FC00", "FC01", "FC02"}, {"FC00"});

    auto rep = whatif_new_arc(s, dest, feats, "HUB", {0.0, 0.0}, s.at(0, 0).rankpct, 200, 9, 3);
    EXPECT_EQ(rep.nearest_origin_id, "FC00");
    EXPECT_EQ(rep.alpha, s.at(0, 0).alpha());
    EXPECT_EQ(rep.beta, s.at(0, 0).beta());
    EXPECT_GE(rep.included_fraction, 0.95);
    EXPECT_EQ(rep.positions.size(), 200u);

    auto zero = whatif_new_arc(s, dest, feats, "HUB", {0.0, 0.0}, 0.0, 200, 9, 3);
    EXPECT_EQ(zero.included_fraction, 0.0);

    auto init_only = whatif_new_arc(s, dest, feats, "HUB", {4.9, 49.0}, 0.5, 0, 9);
    EXPECT_EQ(init_only.nearest_origin_id, "FC05");
    EXPECT_TRUE(init_only.positions.empty());

    EXPECT_THROW(whatif_new_arc(s, dest, {}, "HUB", {0.0}, 0.5, 1, 1), std::invalid_argument);
    EXPECT_THROW(whatif_new_arc(s, dest, feats, "FC01", {0.0, 0.0}, 0.5, 1, 1), std::invalid_argument);
}

TEST(PlantedFixture, DestinationTotalsEqualDemandAndOrderingHolds) {
    auto fx = planted_flow_fixture();
    ASSERT_EQ(fx.train.size(), 40u * 150u);
    std::map<std::string, double> train_tot, test_tot;
    for (const auto& a : fx.train) train_tot[a.dest_id] += a.packages;
    for (const auto& a : fx.test) test_tot[a.dest_id] += a.packages;
    for (const auto& [d, v] : train_tot) EXPECT_NEAR(v, test_tot[d], 1e-9 * v);

    auto rep = evaluate_variants(fx.train, fx.test, {FeatureVariant::null_model, FeatureVariant::c, FeatureVariant::d},
                                 ModelKind::linear);
    EXPECT_EQ(rep[0].predictors, 1);
    EXPECT_LT(rep[0].adj_r2, rep[1].adj_r2);
    EXPECT_LT(rep[1].adj_r2, rep[2].adj_r2);
    EXPECT_GE(rep[2].adj_r2 - rep[0].adj_r2, 0.05);
}
