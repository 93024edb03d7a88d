#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geonet {

struct LinearModel {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    bool ridge_fallback = false;  // design was rank deficient; lambda = kRidgeLambda was used
};

inline constexpr double kRidgeLambda = 1e-8;

// Ordinary least squares with an intercept, solved by column-pivoted QR.
inline LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              std::vector<std::string> names = {}) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_linear: row count mismatch");
    if (x.rows() <= x.cols()) throw std::invalid_argument("fit_linear: need more rows than columns");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_linear: non-finite input");

    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = x;

    LinearModel m;
    m.names = std::move(names);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    Eigen::VectorXd beta;
    if (qr.rank() == p + 1) {
        beta = qr.solve(y);
    } else {
        Eigen::MatrixXd gram = design.transpose() * design;
        gram.diagonal().tail(p).array() += kRidgeLambda;
        beta = gram.ldlt().solve(design.transpose() * y);
        m.ridge_fallback = true;
    }
    m.intercept = beta(0);
    m.coefficients = beta.tail(p);
    return m;
}

inline double predict(const LinearModel& m, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != m.coefficients.size())
        throw std::invalid_argument("predict: expected " + std::to_string(m.coefficients.size()) + " features, got " +
                                    std::to_string(x.size()));
    double s = m.intercept;
    for (std::size_t k = 0; k < x.size(); ++k) s += m.coefficients(static_cast<Eigen::Index>(k)) * x[k];
    return s;
}

}  // namespace geonet
