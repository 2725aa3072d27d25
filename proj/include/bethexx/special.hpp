#pragma once

#include "errors.hpp"
#include "linalg.hpp"
#include "precision.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace bethexx {

inline constexpr double kZetaPrimeMinusOne = -0.1654211437004509;

namespace detail {

inline bool is_nonpositive_integer(cplx z) {
    return z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real());
}

// Number of unit shifts that bring Re z up to at least `target`.
inline int shifts_to(cplx z, double target) {
    return z.real() >= target ? 0 : static_cast<int>(std::ceil(target - z.real()));
}

}  // namespace detail

/// ψ(z) for complex z: upward recurrence to Re z ≥ 10, then the asymptotic series.
inline cplx digamma(cplx z) {
    if (detail::is_nonpositive_integer(z)) throw Error(ErrorCode::PoleArgument, "digamma at a nonpositive integer");
    cplx acc = 0.0;
    const int n = detail::shifts_to(z, 10.0);
    for (int k = 0; k < n; ++k) acc -= 1.0 / (z + double(k));
    z += double(n);
    const cplx w = 1.0 / (z * z);
    // B_2k/(2k), k = 1..8
    static constexpr std::array<double, 8> c{1.0 / 12,    -1.0 / 120,    1.0 / 252,      -1.0 / 240,
                                             1.0 / 132,   -691.0 / 32760, 1.0 / 12,       -3617.0 / 8160};
    cplx series = 0.0, p = w;
    for (double ck : c) {
        series += ck * p;
        p *= w;
    }
    return acc + std::log(z) - 0.5 / z - series;
}

/// log Γ(z) for complex z, defined up to multiples of 2πi.
inline cplx log_gamma(cplx z) {
    if (detail::is_nonpositive_integer(z)) throw Error(ErrorCode::PoleArgument, "gamma at a nonpositive integer");
    cplx acc = 0.0;
    const int n = detail::shifts_to(z, 10.0);
    for (int k = 0; k < n; ++k) acc -= std::log(z + double(k));
    z += double(n);
    const cplx w = 1.0 / (z * z);
    // B_2k/(2k(2k−1)), k = 1..8
    static constexpr std::array<double, 8> c{1.0 / 12,    -1.0 / 360,      1.0 / 1260,   -1.0 / 1680,
                                             1.0 / 1188,  -691.0 / 360360, 1.0 / 156,    -3617.0 / 122400};
    cplx series = 0.0, p = 1.0 / z;
    for (double ck : c) {
        series += ck * p;
        p *= w;
    }
    return acc + (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * M_PI) + series;
}

/// log G(z) for the Barnes G-function. Shifts Re z ≥ 8 with G(z+1) = Γ(z)G(z)
/// and uses the 12-term asymptotic series for log G(u+1).
inline LogValue barnes_g(cplx z) {
    if (detail::is_nonpositive_integer(z)) throw Error(ErrorCode::PoleArgument, "Barnes G vanishes at nonpositive integers");
    cplx acc = 0.0;
    const int n = detail::shifts_to(z, 8.0);
    for (int k = 0; k < n; ++k) acc -= log_gamma(z + double(k));
    const cplx u = z + double(n) - 1.0;
    const cplx lu = std::log(u);
    // B_{2k+2}/(4k(k+1)), k = 1..12
    static constexpr std::array<double, 12> bern{-1.0 / 30,        1.0 / 42,   -1.0 / 30,          5.0 / 66,
                                                 -691.0 / 2730,    7.0 / 6,    -3617.0 / 510,      43867.0 / 798,
                                                 -174611.0 / 330,  854513.0 / 138, -236364091.0 / 2730, 8553103.0 / 6};
    cplx series = 0.0, p = 1.0 / (u * u);
    for (int k = 1; k <= 12; ++k) {
        series += bern[k - 1] / (4.0 * k * (k + 1)) * p;
        p /= u * u;
    }
    const cplx lg = 0.5 * u * u * (lu - 1.5) + 0.5 * u * std::log(2.0 * M_PI) - lu / 12.0 + kZetaPrimeMinusOne + series + acc;
    LogValue v;
    v.log_abs = lg.real();
    v.phase = std::exp(cplx(0.0, lg.imag()));
    return v;
}

/// Spinon scattering factor S({θ}) as (log|S|, phase).
inline LogValue spinon_scattering_factor(const std::vector<double>& theta) {
    const int n = static_cast<int>(theta.size());
    if (n % 2) throw Error(ErrorCode::OddHoleCount, "S needs an even number of holes");
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (theta[a] == theta[b]) throw Error(ErrorCode::CoincidingHoles, "coinciding holes");
    LogValue s = LogValue::from(((n + 2) / 2) % 2 ? -1.0 : 1.0);
    s.log_abs += 0.5 * (n * (n - 2) + 2) * std::log(2.0) + 0.5 * (n * (n - 3) + 2) * std::log(M_PI);
    const LogValue g_half = barnes_g(0.5);
    for (int k = 0; k < 2 * n; ++k) s /= g_half;
    const cplx two_i(0.0, 2.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const cplx x = (theta[a] - theta[b]) / two_i;
            s *= barnes_g(x);
            s *= barnes_g(1.0 + x);
            s /= barnes_g(0.5 + x);
            s /= barnes_g(1.5 + x);
        }
    return s;
}

}  // namespace bethexx
