#pragma once

// Fit-and-score across feature variants: adjusted R2 on the training rows,
// MAPE on training and test rows.

#include <cstddef>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "geonet/flowmodel/evaluation.hpp"
#include "geonet/flowmodel/features.hpp"

namespace geonet {

enum class ModelKind { linear, gbrt };

inline const char* to_string(ModelKind k) { return k == ModelKind::linear ? "linear" : "gbrt"; }

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "linear") return ModelKind::linear;
    if (s == "gbrt") return ModelKind::gbrt;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

inline FlowModel fit_model(const Dataset& ds, ModelKind kind, const GbrtConfig& gbrt = {}) {
    if (kind == ModelKind::linear) return fit_linear(ds.x, ds.y, ds.names);
    return fit_gbrt(ds.x, ds.y, gbrt, ds.names);
}

struct VariantReport {
    FeatureVariant variant = FeatureVariant::null_model;
    ModelKind kind = ModelKind::linear;
    int predictors = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double adj_r2 = 0.0;
    double train_mape = 0.0;
    double test_mape = 0.0;
    bool ridge_fallback = false;
};

// Signatures come from the training rows' total flows and are reused for the
// test rows.
inline VariantReport evaluate_variant(const std::vector<ArcRecord>& train, const std::vector<ArcRecord>& test,
                                      const DomainSignatures& sigs, FeatureVariant variant, ModelKind kind,
                                      Target target = Target::packages, const GbrtConfig& gbrt = {}) {
    const auto tr = build_dataset(train, sigs, variant, target);
    const auto te = build_dataset(test, sigs, variant, target);
    const auto model = fit_model(tr, kind, gbrt);
    VariantReport r;
    r.variant = variant;
    r.kind = kind;
    r.predictors = static_cast<int>(tr.names.size());
    r.n_train = train.size();
    r.n_test = test.size();
    const Eigen::VectorXd fit = std::visit([&](const auto& m) { return predict_rows(m, tr.x); }, model);
    r.adj_r2 = adjusted_r2(tr.y, fit, r.predictors);
    r.train_mape = mape(tr.y, fit);
    r.test_mape = te.x.rows() ? mape(te.y, std::visit([&](const auto& m) { return predict_rows(m, te.x); }, model)) : 0.0;
    if (const auto* lin = std::get_if<LinearModel>(&model)) r.ridge_fallback = lin->ridge_fallback;
    return r;
}

inline std::vector<VariantReport> evaluate_variants(const std::vector<ArcRecord>& train,
                                                    const std::vector<ArcRecord>& test,
                                                    const std::vector<FeatureVariant>& variants, ModelKind kind,
                                                    Target target = Target::packages, const GbrtConfig& gbrt = {}) {
    const auto sigs = domain_signatures(nodes_from_arcs(train));
    std::vector<VariantReport> out;
    for (auto v : variants) out.push_back(evaluate_variant(train, test, sigs, v, kind, target, gbrt));
    return out;
}

inline void write_report(std::ostream& out, const std::vector<VariantReport>& rows) {
    out << std::left << std::setw(8) << "Model" << std::setw(4) << "p" << std::right << std::setw(14) << "Adjusted R2"
        << std::setw(13) << "Train-MAPE" << std::setw(12) << "Test-MAPE" << '\n';
    for (const auto& r : rows) {
        std::string name = to_string(r.variant);
        if (r.variant == FeatureVariant::null_model) name = "Null";
        else if (r.variant == FeatureVariant::cost) name = "Cost";
        else name = "Model " + std::string(1, static_cast<char>(std::toupper(name[0])));
        out << std::left << std::setw(8) << name << std::setw(4) << r.predictors << std::right << std::fixed
            << std::setprecision(4) << std::setw(14) << r.adj_r2 << std::setw(12) << std::setprecision(1)
            << 100.0 * r.train_mape << '%';
        if (r.n_test) out << std::setw(11) << 100.0 * r.test_mape << '%';
        else out << std::setw(12) << '-';
        out << (r.ridge_fallback ? "  (ridge fallback)" : "") << '\n';
        out.unsetf(std::ios::fixed);
    }
}

inline void write_report_csv(std::ostream& out, const std::vector<VariantReport>& rows) {
    out << "variant,model,p,n_train,n_test,adj_r2,train_mape,test_mape,ridge_fallback\n";
    out.precision(17);
    for (const auto& r : rows)
        out << to_string(r.variant) << ',' << to_string(r.kind) << ',' << r.predictors << ',' << r.n_train << ','
            << r.n_test << ',' << r.adj_r2 << ',' << r.train_mape << ',' << r.test_mape << ','
            << (r.ridge_fallback ? 1 : 0) << '\n';
}

}  // namespace geonet
