#pragma once

// Fit metrics, partial dependence, and direction-level flow attribution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "geonet/flowmodel/features.hpp"
#include "geonet/flowmodel/gbrt.hpp"
#include "geonet/flowmodel/linear.hpp"

namespace geonet {

using FlowModel = std::variant<LinearModel, GbrtModel>;

inline double predict(const FlowModel& m, std::span<const double> x) {
    return std::visit([&](const auto& model) { return predict(model, x); }, m);
}

template <class Model>
Eigen::VectorXd predict_rows(const Model& m, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) row[static_cast<std::size_t>(k)] = x(i, k);
        out(i) = predict(m, std::span<const double>(row));
    }
    return out;
}

// Mean absolute percentage error over rows with a positive target.
inline double mape(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("mape: size mismatch");
    double s = 0.0;
    long n = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) <= 0.0) continue;
        s += std::abs(y(i) - yhat(i)) / y(i);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("mape: no positive targets");
    return s / static_cast<double>(n);
}

inline double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size() || y.size() == 0) throw std::invalid_argument("r_squared: size mismatch");
    const double mean = y.mean();
    const double ss_res = (y - yhat).squaredNorm();
    const double ss_tot = (y.array() - mean).square().sum();
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

inline double adjusted_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, int predictors) {
    const auto n = static_cast<double>(y.size());
    if (n <= predictors + 1) throw std::invalid_argument("adjusted_r2: need n > p + 1");
    return 1.0 - (1.0 - r_squared(y, yhat)) * (n - 1.0) / (n - predictors - 1.0);
}

struct PdpCurve {
    std::string feature;
    std::vector<double> grid;
    std::vector<double> values;  // centered: raw average prediction minus the mean over the grid
    double offset = 0.0;         // the subtracted mean, so raw = values + offset

    // Piecewise-linear reading of the curve; flat outside the grid.
    double at(double v) const {
        if (grid.empty()) return 0.0;
        if (v <= grid.front()) return values.front();
        if (v >= grid.back()) return values.back();
        auto hi = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), v) - grid.begin());
        const std::size_t lo = hi - 1;
        const double w = (v - grid[lo]) / (grid[hi] - grid[lo]);
        return values[lo] + w * (values[hi] - values[lo]);
    }
};

// `points` evenly spaced values over [lo, hi], deduplicated.
inline std::vector<double> uniform_grid(double lo, double hi, int points) {
    std::vector<double> g;
    if (points < 1) throw std::invalid_argument("uniform_grid: need at least one point");
    if (hi <= lo || points == 1) return {lo};
    for (int i = 0; i < points; ++i) {
        const double v = i == points - 1 ? hi : lo + (hi - lo) * i / (points - 1);
        if (g.empty() || v > g.back()) g.push_back(v);
    }
    return g;
}

inline std::vector<double> pdp_grid(const Eigen::MatrixXd& x, int feature, int points = 20) {
    if (x.rows() == 0) throw std::invalid_argument("pdp_grid: empty dataset");
    return uniform_grid(x.col(feature).minCoeff(), x.col(feature).maxCoeff(), points);
}

// Linear-interpolated sample quantiles of a column, for axis ticks.
inline std::vector<double> feature_quantiles(const Eigen::MatrixXd& x, int feature, const std::vector<double>& probs) {
    if (x.rows() == 0) throw std::invalid_argument("feature_quantiles: empty dataset");
    std::vector<double> v(x.col(feature).data(), x.col(feature).data() + x.rows());
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double p : probs) {
        const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        out.push_back(v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]));
    }
    return out;
}

// Average prediction with `feature` forced to each grid value, then centered.
// Grid points are independent, so `threads` > 1 splits them across workers and
// still yields the same bits: each average is reduced in row order.
template <class Model>
PdpCurve partial_dependence(const Model& model, const Eigen::MatrixXd& x, int feature, std::vector<double> grid,
                            std::string name = {}, unsigned threads = 1) {
    if (x.rows() == 0) throw std::invalid_argument("partial_dependence: empty dataset");
    if (feature < 0 || feature >= x.cols()) throw std::invalid_argument("partial_dependence: bad feature index");
    if (grid.empty()) throw std::invalid_argument("partial_dependence: empty grid");
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (!(grid[g] > grid[g - 1])) throw std::invalid_argument("partial_dependence: grid must be strictly increasing");

    PdpCurve curve;
    curve.feature = std::move(name);
    curve.grid = std::move(grid);
    std::vector<double> raw(curve.grid.size());

    auto evaluate = [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(static_cast<std::size_t>(x.cols()));
        for (std::size_t g = begin; g < end; ++g) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                for (Eigen::Index k = 0; k < x.cols(); ++k) row[static_cast<std::size_t>(k)] = x(i, k);
                row[static_cast<std::size_t>(feature)] = curve.grid[g];
                sum += predict(model, std::span<const double>(row));
            }
            raw[g] = sum / static_cast<double>(x.rows());
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(raw.size())));
    if (threads == 1) {
        evaluate(0, raw.size());
    } else {
        std::vector<std::jthread> workers;
        const std::size_t chunk = (raw.size() + threads - 1) / threads;
        for (std::size_t b = 0; b < raw.size(); b += chunk)
            workers.emplace_back([&, b] { evaluate(b, std::min(raw.size(), b + chunk)); });
    }

    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    curve.offset = mean;
    curve.values.reserve(raw.size());
    for (double v : raw) curve.values.push_back(v - mean);
    return curve;
}

struct DirectionDeltas {
    std::array<double, kDirections> aggregate{};  // sum over rows of the centered PDP at each row's value
    std::array<double, kDirections> delta{};      // aggregate minus the mean of the other directions
    std::array<PdpCurve, kDirections> curves;
};

// Per-direction flow attribution from the direction-max PDPs.
//
// Curves are averaged over `reference` rows on a grid spanning the values of
// both `reference` and `evaluate`, so a modified dataset can be read against
// the same curves as its baseline. With only one dataset both coincide.
template <class Model>
DirectionDeltas direction_flow_delta(const Model& model, const Dataset& reference, const Dataset* evaluate = nullptr,
                                     int grid_points = 20) {
    const Dataset& target = evaluate ? *evaluate : reference;
    if (reference.x.rows() == 0 || target.x.rows() == 0) throw std::invalid_argument("direction_flow_delta: empty dataset");
    if (target.names != reference.names) throw std::invalid_argument("direction_flow_delta: feature layouts differ");
    DirectionDeltas out;
    for (int k = 0; k < kDirections; ++k) {
        int col = -1;
        try {
            col = reference.column(direction_max_name(k));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("direction_flow_delta: dataset lacks direction feature " + direction_max_name(k));
        }
        const double lo = std::min(reference.x.col(col).minCoeff(), target.x.col(col).minCoeff());
        const double hi = std::max(reference.x.col(col).maxCoeff(), target.x.col(col).maxCoeff());
        out.curves[k] = partial_dependence(model, reference.x, col, uniform_grid(lo, hi, grid_points),
                                           direction_max_name(k));
        double agg = 0.0;
        for (Eigen::Index i = 0; i < target.x.rows(); ++i) agg += out.curves[k].at(target.x(i, col));
        out.aggregate[k] = agg;
    }
    for (int k = 0; k < kDirections; ++k) {
        double others = 0.0;
        for (int j = 0; j < kDirections; ++j)
            if (j != k) others += out.aggregate[j];
        out.delta[k] = out.aggregate[k] - others / (kDirections - 1);
    }
    return out;
}

}  // namespace geonet
