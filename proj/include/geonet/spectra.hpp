#pragma once

// FFT compression of polar flow images.
//
// The pipeline is polar_matrix -> fft2d -> mask -> inverse -> |.|. Spectra
// use unshifted array indices with the DC term at (0, 0): the forward
// transform is unnormalized, so F(0,0) equals the total in-range flow.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geonet/fft.hpp"
#include "geonet/geo_core.hpp"

namespace geonet {

using ComplexMatrix = fft::ComplexMatrix;

struct SpectrumMatrix {
    ComplexMatrix values;  // theta_bins x r_bins
    std::string origin_id;
    PolarGrid grid;
};

inline SpectrumMatrix fft2d(const PolarMatrix& p) {
    if (!p.values.allFinite()) throw std::invalid_argument("fft2d: non-finite polar matrix");
    return {fft::forward2d(p.values), p.origin_id, p.grid};
}

inline ComplexMatrix ifft2d(const SpectrumMatrix& f) { return fft::inverse2d(f.values); }

// Keeps entries with row + col <= mask_max and zeroes the rest.
inline SpectrumMatrix triangular_mask(SpectrumMatrix f, int mask_max) {
    if (mask_max < 0) throw std::invalid_argument("triangular_mask: mask_max must be >= 0");
    for (Eigen::Index i = 0; i < f.values.rows(); ++i)
        for (Eigen::Index j = 0; j < f.values.cols(); ++j)
            if (i + j > mask_max) f.values(i, j) = 0.0;
    return f;
}

enum class MaskMode { keep_low, remove_low };

struct Pivot {
    int row = 0;
    int col = 0;
};

// Block mask on the spectrum with the zero frequency moved onto `pivot`.
//
// In the shifted view, frequency (u, v) sits at (pivot.row + u, pivot.col + v)
// modulo the extent. The block covers shifted rows
// [pivot.row - rows/2, pivot.row - rows/2 + rows) and likewise for columns,
// clipped to the matrix. remove_low zeroes the block (a high-pass filter),
// keep_low zeroes everything else. The result stays in unshifted layout.
inline SpectrumMatrix rectangular_mask(SpectrumMatrix f, int rows, int cols, Pivot pivot, MaskMode mode) {
    const int R = static_cast<int>(f.values.rows());
    const int C = static_cast<int>(f.values.cols());
    if (rows < 0 || cols < 0) throw std::invalid_argument("rectangular_mask: negative block size");
    if (pivot.row < 0 || pivot.row >= R || pivot.col < 0 || pivot.col >= C)
        throw std::invalid_argument("rectangular_mask: pivot outside the matrix");
    const int r0 = std::max(0, pivot.row - rows / 2);
    const int r1 = std::min(R, pivot.row - rows / 2 + rows);
    const int c0 = std::max(0, pivot.col - cols / 2);
    const int c1 = std::min(C, pivot.col - cols / 2 + cols);
    auto unshift = [](int shifted, int p, int n) { return ((shifted - p) % n + n) % n; };

    std::vector<char> in_block(static_cast<std::size_t>(R) * C, 0);
    for (int a = r0; a < r1; ++a)
        for (int b = c0; b < c1; ++b)
            in_block[static_cast<std::size_t>(unshift(a, pivot.row, R)) * C + unshift(b, pivot.col, C)] = 1;

    const char zero_flag = mode == MaskMode::remove_low ? 1 : 0;
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j)
            if (in_block[static_cast<std::size_t>(i) * C + j] == zero_flag) f.values(i, j) = 0.0;
    return f;
}

// Magnitude of a complex coefficient, read as smoothed flow intensity.
inline double power(double re, double im) { return std::hypot(re, im); }

inline RealMatrix magnitude_spectrum(const SpectrumMatrix& masked) { return ifft2d(masked).cwiseAbs(); }

struct Coefficient {
    int row = 0;
    int col = 0;
    double re = 0.0;
    double im = 0.0;
};

struct CompressionSummary {
    int mask_max = 0;
    std::vector<Coefficient> coefficients;  // row-major over kept entries
    std::vector<double> flat;                // re, im per kept entry; (0,0) contributes re only

    const Coefficient* at(int row, int col) const {
        for (const auto& c : coefficients)
            if (c.row == row && c.col == col) return &c;
        return nullptr;
    }
};

inline CompressionSummary compression_summary(const SpectrumMatrix& f, int mask_max) {
    if (mask_max < 0) throw std::invalid_argument("compression_summary: mask_max must be >= 0");
    CompressionSummary cs;
    cs.mask_max = mask_max;
    for (int i = 0; i < f.values.rows(); ++i) {
        for (int j = 0; j < f.values.cols(); ++j) {
            if (i + j > mask_max) continue;
            const auto v = f.values(i, j);
            cs.coefficients.push_back({i, j, v.real(), v.imag()});
            cs.flat.push_back(v.real());
            if (i != 0 || j != 0) cs.flat.push_back(v.imag());
        }
    }
    return cs;
}

inline CompressionSummary compression_summary(const GeoNode& origin, const NodeSet& set, const PolarGrid& grid,
                                              int mask_max) {
    return compression_summary(fft2d(polar_matrix(origin, set, grid)), mask_max);
}

struct DirectionPeak {
    double value = 0.0;  // smoothed flow intensity
    int r_bin = 0;       // ring index; ring k spans [k*r_step, (k+1)*r_step)
};

struct Geosig {
    std::vector<DirectionPeak> peaks;  // one per direction row
    RealMatrix magnitude;              // full smoothed image, empty when not requested

    // (value, r_bin) interleaved per direction: length 2 * theta_bins.
    std::vector<double> flat() const {
        std::vector<double> out;
        out.reserve(peaks.size() * 2);
        for (const auto& p : peaks) {
            out.push_back(p.value);
            out.push_back(static_cast<double>(p.r_bin));
        }
        return out;
    }
};

// Relative distance from a row maximum within which rings count as tied.
inline constexpr double kTieTolerance = 1e-9;

enum class GeosigMode {
    max_pair,        // row maximum and its ring, lowest ring on ties
    first_nonzero,   // first ring with intensity above a numerical zero
    first_above,     // first ring with intensity >= threshold
};

struct GeosigOptions {
    int mask_max = 2;
    GeosigMode mode = GeosigMode::max_pair;
    double threshold = 0.0;
    bool keep_magnitude = false;
};

inline Geosig geosig_from_magnitude(const RealMatrix& mag, const GeosigOptions& opts = {}) {
    Geosig g;
    g.peaks.resize(static_cast<std::size_t>(mag.rows()));
    constexpr double kNumericalZero = 1e-9;
    for (Eigen::Index i = 0; i < mag.rows(); ++i) {
        DirectionPeak peak;
        switch (opts.mode) {
            case GeosigMode::max_pair: {
                // Entries within kTieTolerance of the maximum are ties: transform
                // round-off must not decide the ring of a flat row.
                const double row_max = mag.cols() ? mag.row(i).maxCoeff() : 0.0;
                peak.value = row_max;
                for (Eigen::Index j = 0; j < mag.cols(); ++j) {
                    if (mag(i, j) >= row_max - kTieTolerance * row_max) {
                        peak.r_bin = static_cast<int>(j);
                        break;
                    }
                }
                break;
            }
            case GeosigMode::first_nonzero:
            case GeosigMode::first_above: {
                const double cut = opts.mode == GeosigMode::first_nonzero ? kNumericalZero : opts.threshold;
                for (Eigen::Index j = 0; j < mag.cols(); ++j) {
                    const bool hit = opts.mode == GeosigMode::first_nonzero ? mag(i, j) > cut : mag(i, j) >= cut;
                    if (hit) {
                        peak = {mag(i, j), static_cast<int>(j)};
                        break;
                    }
                }
                break;
            }
        }
        g.peaks[static_cast<std::size_t>(i)] = peak;
    }
    if (opts.keep_magnitude) g.magnitude = mag;
    return g;
}

inline Geosig geosig_from_polar(const PolarMatrix& p, const GeosigOptions& opts = {}) {
    return geosig_from_magnitude(magnitude_spectrum(triangular_mask(fft2d(p), opts.mask_max)), opts);
}

inline Geosig geosig(const GeoNode& origin, const NodeSet& set, const PolarGrid& grid,
                     const GeosigOptions& opts = {}) {
    return geosig_from_polar(polar_matrix(origin, set, grid), opts);
}

// Plain PGM (P2), each row scaled so its maximum maps to 255.
inline void write_pgm(std::ostream& out, const RealMatrix& image) {
    out << "P2\n" << image.cols() << ' ' << image.rows() << "\n255\n";
    for (Eigen::Index i = 0; i < image.rows(); ++i) {
        const double row_max = image.rows() && image.cols() ? image.row(i).maxCoeff() : 0.0;
        for (Eigen::Index j = 0; j < image.cols(); ++j) {
            int level = 0;
            if (row_max > 0.0) level = static_cast<int>(std::lround(255.0 * std::max(0.0, image(i, j)) / row_max));
            out << (j ? " " : "") << level;
        }
        out << '\n';
    }
}

inline void write_geosig_csv_header(std::ostream& out, int theta_bins) {
    out << "origin_id";
    for (int k = 0; k < theta_bins; ++k) out << ",dir" << k << "_max,dir" << k << "_r";
    out << '\n';
}

inline void write_geosig_csv_row(std::ostream& out, const std::string& origin_id, const Geosig& g) {
    const auto old = out.precision(17);
    out << origin_id;
    for (const auto& p : g.peaks) out << ',' << p.value << ',' << p.r_bin;
    out << '\n';
    out.precision(old);
}

}  // namespace geonet
