#pragma once

#include "errors.hpp"
#include "precision.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

namespace bethexx {

/// Conjugate close pair c ± i(1/2 + δ) stored by index into the root list.
/// Keeping (c, δ) lets pair differences be formed without cancellation.
template <class Real = double>
struct ClosePair {
    std::size_t plus = 0;
    std::size_t minus = 0;
    complex_t<Real> center{};
    complex_t<Real> delta{};
};

template <class Real = double>
struct BetheState {
    using complex_type = complex_t<Real>;

    int M = 0;
    std::vector<complex_type> roots;
    std::vector<ClosePair<Real>> pairs;
    bool on_shell = false;
    bool deviation_frozen = false;
    double max_residual = std::numeric_limits<double>::infinity();
    double tolerance = 1e-10;

    int N() const { return static_cast<int>(roots.size()); }
    int sz_sector() const { return M / 2 - N(); }
};

template <class Real>
BetheState<Real> make_state(int M, std::vector<complex_t<Real>> roots) {
    BetheState<Real> s;
    s.M = M;
    s.roots = std::move(roots);
    return s;
}

/// Same state in another working precision.
template <class To, class From>
BetheState<To> convert_state(const BetheState<From>& s) {
    BetheState<To> out;
    out.M = s.M;
    out.on_shell = s.on_shell;
    out.deviation_frozen = s.deviation_frozen;
    out.max_residual = s.max_residual;
    out.tolerance = s.tolerance;
    using std::imag;
    using std::real;
    auto cv = [](const complex_t<From>& z) {
        return complex_t<To>(To(real(z)), To(imag(z)));
    };
    for (const auto& r : s.roots) out.roots.push_back(cv(r));
    for (const auto& p : s.pairs) out.pairs.push_back({p.plus, p.minus, cv(p.center), cv(p.delta)});
    // Rebuild pair members from (c, δ) so the target precision sees exact pairs.
    const auto half = complex_t<To>(To(0), To(1) / To(2));
    for (const auto& p : out.pairs) {
        const auto shift = complex_t<To>(To(0), To(1)) * p.delta + half;
        out.roots[p.plus] = p.center + shift;
        out.roots[p.minus] = p.center - shift;
    }
    return out;
}

// ---------------------------------------------------------------- kernels

template <class C>
C kernel_K(const C& x, double a = 1.0) {
    using R = real_of_t<C>;
    const R aa(a);
    return aa / pi_v<R>() / (x * x + aa * aa);
}

inline cplx kernel_K(double x, double a = 1.0) { return kernel_K(cplx(x, 0.0), a); }

/// t(x) = i / (x (x + i)); t(x) + t(-x) = 2πi K(x).
template <class C>
C t_fn(const C& x) {
    using R = real_of_t<C>;
    const C i(R(0), R(1));
    return i / (x * (x + i));
}

// ------------------------------------------------------- pair bookkeeping

/// λ_j − λ_k + s·i, exact for the two members of a close pair.
template <class Real>
complex_t<Real> root_diff(const BetheState<Real>& st, std::size_t j, std::size_t k, int s) {
    using C = complex_t<Real>;
    const C i(Real(0), Real(1));
    for (const auto& p : st.pairs) {
        if (j == p.plus && k == p.minus) return i * (C(Real(1 + s)) + Real(2) * p.delta);
        if (j == p.minus && k == p.plus) return i * (C(Real(s - 1)) - Real(2) * p.delta);
    }
    return st.roots[j] - st.roots[k] + C(Real(0), Real(s));
}

// ---------------------------------------------------------- polynomials

template <class C>
C baxter_q(const std::vector<C>& roots, const C& lambda) {
    C v(1);
    for (const auto& r : roots) v *= (lambda - r);
    return v;
}

template <class Real>
complex_t<Real> baxter_q(const BetheState<Real>& st, const complex_t<Real>& lambda) {
    return baxter_q(st.roots, lambda);
}

/// ((λ − i/2)/(λ + i/2))^M through exp(M log), principal logs.
template <class C>
C vacuum_ratio_power(const C& lambda, int M) {
    using R = real_of_t<C>;
    using std::exp;
    using std::log;
    const C h(R(0), R(1) / R(2));
    return exp(R(M) * (log(lambda - h) - log(lambda + h)));
}

/// 𝔞(λ) accumulated as a sum of principal logs, so e^M and the q ratio
/// never under- or overflow separately.
template <class Real>
complex_t<Real> counting_fn(const BetheState<Real>& st, const complex_t<Real>& lambda, double pole_tol = 1e-14) {
    using C = complex_t<Real>;
    using std::abs;
    using std::exp;
    using std::log;
    const C i(Real(0), Real(1));
    const C h = i / Real(2);
    if (abs(lambda + h) <= Real(pole_tol))
        throw Error(ErrorCode::PoleAtArgument, "lambda = -i/2");
    if (abs(lambda - h) == Real(0)) return C(Real(0));
    C la = Real(st.M) * (log(lambda - h) - log(lambda + h));
    for (const auto& r : st.roots) {
        const C d = lambda - r - i;
        if (abs(d) <= Real(pole_tol) * (Real(1) + abs(r)))
            throw Error(ErrorCode::PoleAtArgument, "lambda - i coincides with a root");
        la += log(lambda - r + i) - log(d);
    }
    return exp(la);
}

/// Logarithmic derivative of 𝔞 (𝔞'/𝔞) at a generic point.
template <class Real>
complex_t<Real> counting_fn_logderiv(const BetheState<Real>& st, const complex_t<Real>& lambda) {
    using C = complex_t<Real>;
    const C i(Real(0), Real(1));
    const C h = i / Real(2);
    C s = Real(st.M) * (Real(1) / (lambda - h) - Real(1) / (lambda + h));
    for (const auto& r : st.roots) s += Real(1) / (lambda - r + i) - Real(1) / (lambda - r - i);
    return s;
}

template <class Real>
complex_t<Real> counting_fn_derivative(const BetheState<Real>& st, const complex_t<Real>& lambda) {
    return counting_fn(st, lambda) * counting_fn_logderiv(st, lambda);
}

/// 𝔞'(λ_j) at a root of an on-shell state, with 𝔞(λ_j) = −1 used exactly.
template <class Real>
complex_t<Real> counting_fn_derivative_at_root(const BetheState<Real>& st, std::size_t j) {
    using C = complex_t<Real>;
    const C i(Real(0), Real(1));
    const C h = i / Real(2);
    const C lam = st.roots[j];
    C s = Real(st.M) * (Real(1) / (lam - h) - Real(1) / (lam + h));
    for (std::size_t k = 0; k < st.roots.size(); ++k)
        s += Real(1) / root_diff(st, j, k, +1) - Real(1) / root_diff(st, j, k, -1);
    return -s;
}

/// 𝔞(λ_j) + 1 from the self-skipping product: 𝔞(λ_j) = −e(λ_j)^M ∏_{k≠j} (λ_j−λ_k+i)/(λ_j−λ_k−i).
template <class Real>
std::vector<complex_t<Real>> bethe_residuals(const BetheState<Real>& st) {
    using C = complex_t<Real>;
    std::vector<C> out;
    out.reserve(st.roots.size());
    for (std::size_t j = 0; j < st.roots.size(); ++j) {
        C p = vacuum_ratio_power(st.roots[j], st.M);
        for (std::size_t k = 0; k < st.roots.size(); ++k) {
            if (k == j) continue;
            p *= root_diff(st, j, k, +1) / root_diff(st, j, k, -1);
        }
        out.push_back(C(Real(1)) - p);
    }
    return out;
}

template <class Real>
double max_abs(const std::vector<complex_t<Real>>& v) {
    using std::abs;
    double m = 0.0;
    for (const auto& z : v) m = std::max(m, static_cast<double>(abs(z)));
    return m;
}

/// Records residual and on-shell flag against the state's tolerance.
template <class Real>
void mark_on_shell(BetheState<Real>& st) {
    st.max_residual = max_abs<Real>(bethe_residuals(st));
    st.on_shell = st.max_residual <= st.tolerance;
}

/// τ(μ) = (𝔞(μ)+1) q(μ−i)/q(μ) = (e^M q(μ+i) + q(μ−i))/q(μ); limit form at a root.
template <class Real>
complex_t<Real> transfer_eigenvalue(const BetheState<Real>& st, const complex_t<Real>& mu, double root_tol = 1e-10) {
    using C = complex_t<Real>;
    using std::abs;
    const C i(Real(0), Real(1));
    for (std::size_t j = 0; j < st.roots.size(); ++j) {
        if (abs(mu - st.roots[j]) > Real(root_tol)) continue;
        // L'Hôpital on numerator / q.
        const C lam = st.roots[j];
        const C e = vacuum_ratio_power(lam, st.M);
        const C h = i / Real(2);
        const C qp = baxter_q(st.roots, C(lam + i));
        const C qm = baxter_q(st.roots, C(lam - i));
        C dlog_e = Real(st.M) * (Real(1) / (lam - h) - Real(1) / (lam + h));
        C sp(Real(0)), sm(Real(0));
        for (const auto& r : st.roots) {
            sp += Real(1) / (lam + i - r);
            sm += Real(1) / (lam - i - r);
        }
        C dq(Real(1));
        for (std::size_t k = 0; k < st.roots.size(); ++k)
            if (k != j) dq *= (lam - st.roots[k]);
        return (e * qp * (dlog_e + sp) + qm * sm) / dq;
    }
    const C e = vacuum_ratio_power(mu, st.M);
    return (e * baxter_q(st.roots, C(mu + i)) + baxter_q(st.roots, C(mu - i))) / baxter_q(st.roots, mu);
}

// -------------------------------------------------------------- spectrum

/// Eigenvalue of H = Σ(σ·σ − 1): E = −2 Σ 1/(λ² + 1/4).
template <class Real>
double bethe_energy(const BetheState<Real>& st) {
    using C = complex_t<Real>;
    C e(Real(0));
    for (const auto& r : st.roots) e += Real(-2) / (r * r + Real(1) / Real(4));
    return static_cast<double>(std::real(e));
}

inline double reduce_angle(double p) {
    const double two_pi = 2.0 * M_PI;
    p = std::fmod(p, two_pi);
    if (p <= -M_PI) p += two_pi;
    if (p > M_PI) p -= two_pi;
    return p;
}

/// Lattice momentum from e^{iP} = ∏ (λ + i/2)/(λ − i/2), reduced to (−π, π].
template <class Real>
double bethe_momentum(const BetheState<Real>& st) {
    double p = 0.0;
    for (const auto& r : st.roots) {
        const cplx z = to_double(r);
        p += std::arg((z + cplx(0, 0.5)) / (z - cplx(0, 0.5)));
    }
    return reduce_angle(p);
}

struct SpinonKinematics {
    double dE = 0.0;
    double dP = 0.0;
};

/// ΔE = Σ π/(2 cosh πθ), ΔP = Σ (arctan sinh πθ − π/2) mod 2π.
inline SpinonKinematics spinon_energy_momentum(const std::vector<double>& holes) {
    if (holes.size() % 2 != 0) throw Error(ErrorCode::OddHoleCount, "number of holes must be even");
    SpinonKinematics k;
    for (double th : holes) {
        k.dE += M_PI / (2.0 * std::cosh(M_PI * th));
        k.dP += std::atan(std::sinh(M_PI * th)) - M_PI / 2.0;
    }
    k.dP = reduce_angle(k.dP);
    return k;
}

}  // namespace bethexx
