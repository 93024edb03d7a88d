#pragma once

// Versioned JSON documents for fitted models.

#include <fstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "geonet/errors.hpp"
#include "geonet/flowmodel/evaluation.hpp"

namespace geonet {

inline constexpr const char* kModelSchema = "geonet.model/1";

struct ModelArtifact {
    FeatureVariant variant = FeatureVariant::null_model;
    FlowModel model;
};

inline nlohmann::json to_json(const ModelArtifact& a) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["variant"] = to_string(a.variant);
    if (const auto* lin = std::get_if<LinearModel>(&a.model)) {
        j["kind"] = "linear";
        j["features"] = lin->names;
        j["intercept"] = lin->intercept;
        j["coefficients"] = std::vector<double>(lin->coefficients.data(), lin->coefficients.data() + lin->coefficients.size());
        j["ridge_fallback"] = lin->ridge_fallback;
    } else {
        const auto& g = std::get<GbrtModel>(a.model);
        j["kind"] = "gbrt";
        j["features"] = g.names;
        j["n_features"] = g.n_features;
        j["init"] = g.init;
        j["learning_rate"] = g.learning_rate;
        j["n_iterations"] = g.n_iterations;
        j["max_depth"] = g.max_depth;
        auto& trees = j["trees"] = nlohmann::json::array();
        for (const auto& t : g.trees) {
            nlohmann::json jt;
            for (const auto& n : t.nodes) {
                jt["feature"].push_back(n.feature);
                jt["threshold"].push_back(n.threshold);
                jt["left"].push_back(n.left);
                jt["right"].push_back(n.right);
                jt["value"].push_back(n.value);
            }
            trees.push_back(std::move(jt));
        }
    }
    return j;
}

inline ModelArtifact model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kModelSchema)
            throw data_error("model schema mismatch: '" + j.at("schema").get<std::string>() + "'");
        ModelArtifact a;
        a.variant = parse_variant(j.at("variant").get<std::string>());
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "linear") {
            LinearModel m;
            m.names = j.at("features").get<std::vector<std::string>>();
            m.intercept = j.at("intercept").get<double>();
            auto c = j.at("coefficients").get<std::vector<double>>();
            m.coefficients = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
            m.ridge_fallback = j.value("ridge_fallback", false);
            a.model = std::move(m);
        } else if (kind == "gbrt") {
            GbrtModel m;
            m.names = j.at("features").get<std::vector<std::string>>();
            m.n_features = j.at("n_features").get<std::size_t>();
            m.init = j.at("init").get<double>();
            m.learning_rate = j.at("learning_rate").get<double>();
            m.n_iterations = j.at("n_iterations").get<int>();
            m.max_depth = j.at("max_depth").get<int>();
            for (const auto& jt : j.at("trees")) {
                RegressionTree t;
                const auto& f = jt.at("feature");
                for (std::size_t i = 0; i < f.size(); ++i) {
                    RegressionTree::Node n;
                    n.feature = f[i].get<int>();
                    n.threshold = jt.at("threshold")[i].get<double>();
                    n.left = jt.at("left")[i].get<int>();
                    n.right = jt.at("right")[i].get<int>();
                    n.value = jt.at("value")[i].get<double>();
                    const int size = static_cast<int>(f.size());
                    if (n.feature >= static_cast<int>(m.n_features) ||
                        (n.feature >= 0 && (n.left <= static_cast<int>(i) || n.left >= size || n.right >= size ||
                                            n.right <= static_cast<int>(i))))
                        throw data_error("malformed tree node");
                    t.nodes.push_back(n);
                }
                if (t.nodes.empty()) throw data_error("empty tree");
                m.trees.push_back(std::move(t));
            }
            a.model = std::move(m);
        } else {
            throw data_error("unknown model kind '" + kind + "'");
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed model document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw data_error(std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const std::string& path, const ModelArtifact& a) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    out << to_json(a).dump(1) << '\n';
}

inline ModelArtifact load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error("'" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace geonet
