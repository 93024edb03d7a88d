#pragma once

// Independent reference computations used by the tests. Nothing in here calls
// into the transform or fitting code it is used to check.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;

// Direct double-sum DFT: F(u,v) = sum_{x,y} P(x,y) exp(sign*2*pi*i*(ux/R + vy/C)).
inline Eigen::MatrixXcd naive_dft(const Eigen::MatrixXcd& p, bool inverse = false) {
    const auto R = p.rows();
    const auto C = p.cols();
    const double sign = inverse ? 1.0 : -1.0;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(R, C);
    for (Eigen::Index u = 0; u < R; ++u) {
        for (Eigen::Index v = 0; v < C; ++v) {
            cplx acc{0.0, 0.0};
            for (Eigen::Index x = 0; x < R; ++x) {
                for (Eigen::Index y = 0; y < C; ++y) {
                    // Exact integer phase reduction before the trig call.
                    const double phase = static_cast<double>((u * x) % R) / static_cast<double>(R) +
                                         static_cast<double>((v * y) % C) / static_cast<double>(C);
                    const double a = sign * 2.0 * std::numbers::pi * phase;
                    acc += p(x, y) * cplx{std::cos(a), std::sin(a)};
                }
            }
            out(u, v) = acc;
        }
    }
    if (inverse) out /= static_cast<double>(R * C);
    return out;
}

inline Eigen::MatrixXcd naive_dft(const Eigen::MatrixXd& p) { return naive_dft(Eigen::MatrixXcd(p.cast<cplx>())); }

// Keep (i,j) with i + j <= m, zero the rest, by explicit enumeration.
inline Eigen::MatrixXcd naive_triangular(Eigen::MatrixXcd f, int m) {
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index j = 0; j < f.cols(); ++j)
            if (i + j > m) f(i, j) = 0.0;
    return f;
}

// Circularly roll a matrix so element (0,0) lands on (dr, dc), as numpy.roll would.
inline Eigen::MatrixXcd roll(const Eigen::MatrixXcd& f, int dr, int dc) {
    const int R = static_cast<int>(f.rows());
    const int C = static_cast<int>(f.cols());
    Eigen::MatrixXcd out(R, C);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out(((i + dr) % R + R) % R, ((j + dc) % C + C) % C) = f(i, j);
    return out;
}

// High-pass / low-pass oracle: shift DC onto the pivot, zero a block in the
// shifted picture, shift back, invert with the naive DFT, take magnitudes.
inline Eigen::MatrixXd naive_rect_filter(const Eigen::MatrixXcd& f, int rows, int cols, int pr, int pc,
                                         bool remove_low) {
    Eigen::MatrixXcd shifted = roll(f, pr, pc);
    const int R = static_cast<int>(f.rows());
    const int C = static_cast<int>(f.cols());
    for (int a = 0; a < R; ++a) {
        for (int b = 0; b < C; ++b) {
            const bool in_block = a >= pr - rows / 2 && a < pr - rows / 2 + rows && b >= pc - cols / 2 &&
                                  b < pc - cols / 2 + cols;
            if (in_block == remove_low) shifted(a, b) = 0.0;
        }
    }
    return naive_dft(roll(shifted, -pr, -pc), true).cwiseAbs();
}

// Row maximum and the lowest column within 1e-9 relative of it.
struct RowPeak {
    double value;
    int col;
};

inline std::vector<RowPeak> row_peaks(const Eigen::MatrixXd& mag) {
    std::vector<RowPeak> out;
    for (Eigen::Index i = 0; i < mag.rows(); ++i) {
        double m = 0.0;
        for (Eigen::Index j = 0; j < mag.cols(); ++j) m = std::max(m, mag(i, j));
        int col = 0;
        for (Eigen::Index j = 0; j < mag.cols(); ++j) {
            if (mag(i, j) >= m * (1.0 - 1e-9)) {
                col = static_cast<int>(j);
                break;
            }
        }
        out.push_back({m, col});
    }
    return out;
}

inline Eigen::MatrixXd random_nonnegative(std::mt19937_64& rng, int rows, int cols, double scale = 100.0) {
    std::uniform_real_distribution<double> u(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

// Normal-equations least squares with an intercept column.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::MatrixXd design(x.rows(), x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    const Eigen::MatrixXd gram = design.transpose() * design;
    return gram.ldlt().solve(design.transpose() * y);  // [intercept, beta...]
}

}  // namespace oracle
