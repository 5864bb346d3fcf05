#pragma once

// Small numerical helpers shared by the modules: adaptive Simpson quadrature,
// Gauss-Legendre panels, and a thin RAII layer over FFTW.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace corrsynth::numerics {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction. `abs_tol` is the absolute
/// error target over [a, b]; the interval is pre-split into `panels` pieces so
/// narrow features are not stepped over by the first estimate.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol, int panels = 16,
                        int max_depth = 40) {
    if (a == b) return 0.0;
    double sum = 0.0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double hi = (p + 1 == panels) ? b : a + (p + 1) * h;
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        sum += detail::simpson_step(f, lo, hi, flo, fm, fhi, whole, abs_tol / panels, max_depth);
    }
    return sum;
}

/// 8-point Gauss-Legendre on [a, b]; exact for polynomials of degree <= 15.
template <class F>
double gauss_legendre8(const F& f, double a, double b) {
    static constexpr std::array<double, 4> x{0.1834346424956498, 0.5255324099163290,
                                             0.7966664774136267, 0.9602898564975363};
    static constexpr std::array<double, 4> w{0.3626837833783620, 0.3137066458778873,
                                             0.2223810344533745, 0.1012285362903763};
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
    }
    return s * r;
}

// FFTW planning is not thread safe; execution with new-array functions is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Forward real DFT: X_k = sum_n x_n exp(-2 pi i k n / N), k = 0..N/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

/// Inverse of rfft, including the 1/N factor.
inline std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
    std::vector<std::complex<double>> in(spectrum.begin(), spectrum.end());
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= inv;
    return out;
}

/// FNV-1a, used to stamp output files with a stable config hash.
inline std::uint64_t fnv1a(std::span<const char> bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace corrsynth::numerics
