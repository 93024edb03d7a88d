#pragma once

// Discrete Fourier transforms of arbitrary length.
//
// Power-of-two lengths use an iterative radix-2 transform; every other length
// goes through Bluestein's chirp-z reformulation on a padded power-of-two
// convolution. Both directions are unnormalized here; the 2-D inverse applies
// the 1/N factor.

#include <complex>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace geonet::fft {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

namespace detail {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

// exp(sign * 2*pi*i * k / n), with k reduced first so large k keep full precision.
inline cplx twiddle(std::uint64_t k, std::uint64_t n, double sign) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k % n) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

inline void radix2(std::span<cplx> a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cplx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) tw[k] = twiddle(k, n, sign);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * tw[k * stride];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

inline void bluestein(std::span<cplx> a, bool inverse) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;
    // chirp_k = exp(sign * pi*i * k^2 / n) = twiddle(k^2 mod 2n, 2n)
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        chirp[k] = twiddle(k2, 2 * n, sign);
    }
    std::vector<cplx> x(m, cplx{}), y(m, cplx{});
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    y[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
    radix2(x, false);
    radix2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    radix2(x, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace detail

// In-place unnormalized 1-D DFT. Forward uses exp(-2*pi*i*jk/n).
inline void transform(std::span<cplx> data, bool inverse = false) {
    if (data.size() <= 1) return;
    if (detail::is_pow2(data.size()))
        detail::radix2(data, inverse);
    else
        detail::bluestein(data, inverse);
}

// Separable 2-D transform: rows, then columns. Unnormalized in both directions.
inline ComplexMatrix transform2d(ComplexMatrix m, bool inverse) {
    const auto rows = m.rows();
    const auto cols = m.cols();
    std::vector<cplx> buf;
    buf.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) buf[j] = m(i, j);
        transform(buf, inverse);
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = buf[j];
    }
    buf.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) buf[i] = m(i, j);
        transform(buf, inverse);
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = buf[i];
    }
    return m;
}

inline ComplexMatrix forward2d(const Eigen::MatrixXd& real) { return transform2d(real.cast<cplx>(), false); }

inline ComplexMatrix inverse2d(const ComplexMatrix& spectrum) {
    ComplexMatrix out = transform2d(spectrum, true);
    if (out.size() > 0) out /= static_cast<double>(out.size());
    return out;
}

}  // namespace geonet::fft
