#pragma once

#include "core.hpp"
#include "det.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "quad.hpp"
#include "solve.hpp"
#include "special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <future>
#include <random>
#include <string>
#include <vector>

namespace bethexx {

// ------------------------------------------------------------ kernels

/// K^(c)(x) = K(x − i/2) + K(x + i/2).
inline cplx kernel_Kc(cplx x) {
    const cplx h(0.0, 0.5);
    return kernel_K(x - h) + kernel_K(x + h);
}

/// Ground-state density 1/(2 cosh πλ).
inline cplx rho_g(cplx x) { return 0.5 / std::cosh(M_PI * x); }

/// Complex-root density ρ̃(λ) = K_{1/2}(λ).
inline cplx rho_tilde(cplx x) { return kernel_K(x, 0.5); }

// ------------------------------------------------------------ densities

/// Inside form of ρ_{1/2}, continued analytically (used on shifted contours).
inline cplx rho_half_inside(cplx lambda, cplx mu) { return 0.5 / std::cosh(M_PI * (lambda - mu)); }

/// Inside form of ρ_1 with y = (λ−μ)/2i:
/// (1/4π)[ψ(1+y) + ψ(1−y) − ψ(1/2+y) − ψ(1/2−y)].
/// For large |y| away from the real axis the four digammas cancel to O(1/y²),
/// so the even Bernoulli series of the combination is summed instead.
inline cplx rho_one_inside(cplx lambda, cplx mu) {
    const cplx y = (lambda - mu) / cplx(0.0, 2.0);
    if (std::abs(y) > 30.0 && std::abs(y.real()) < 0.5 * std::abs(y)) {
        // B_2m, m = 1..8
        static constexpr std::array<double, 8> b{1.0 / 6,  -1.0 / 30, 1.0 / 42,       -1.0 / 30,
                                                 5.0 / 66, -691.0 / 2730, 7.0 / 6, -3617.0 / 510};
        const cplx w = 1.0 / (y * y);
        cplx s = 0.0, p = w;
        for (int m = 1; m <= 8; ++m) {
            s += (2.0 - std::pow(2.0, 1 - 2 * m)) * b[m - 1] / (2.0 * m) * p;
            p *= w;
        }
        return -2.0 * s / (4.0 * M_PI);
    }
    return (digamma(1.0 + y) + digamma(1.0 - y) - digamma(0.5 + y) - digamma(0.5 - y)) / (4.0 * M_PI);
}

namespace detail {

// ρ_1 inside with ψ(1/2 − y) taken twice; kept only to show that it misses the equation.
inline cplx rho_one_inside_unsymmetrized(cplx lambda, cplx mu) {
    const cplx y = (lambda - mu) / cplx(0.0, 2.0);
    return (digamma(1.0 + y) + digamma(1.0 - y) - 2.0 * digamma(0.5 - y)) / (4.0 * M_PI);
}

}  // namespace detail

enum class DensityBranch { inside, outside };

inline DensityBranch density_branch(double a, cplx mu, double tol = 1e-9) {
    const double d = std::abs(mu.imag()) - a;
    if (std::abs(d) <= tol) throw Error(ErrorCode::BranchBoundary, "|Im mu| on the branch line of rho_a");
    return d < 0 ? DensityBranch::inside : DensityBranch::outside;
}

/// ρ_a(λ, μ) solving ρ_a(λ,μ) + ∫K(λ−ν)ρ_a(ν,μ)dν = K_a(λ−μ) for a ∈ {1/2, 1}.
inline cplx density(double a, cplx lambda, cplx mu, double tol = 1e-9) {
    const auto br = density_branch(a, mu, tol);
    const double sigma = mu.imag() > 0 ? 1.0 : -1.0;
    if (a == 0.5) {
        if (br == DensityBranch::inside) return rho_half_inside(lambda, mu);
        const cplx y = (lambda - mu) / cplx(0.0, 2.0 * sigma);
        return (digamma(0.75 - y) + digamma(-0.25 - y) - 2.0 * digamma(0.25 - y)) / (4.0 * M_PI);
    }
    if (a == 1.0) {
        if (br == DensityBranch::inside) return rho_one_inside(lambda, mu);
        return kernel_K(lambda - mu + cplx(0.0, 0.5 * sigma), 0.5);
    }
    throw Error(ErrorCode::InvalidArgument, "density width must be 1/2 or 1");
}

/// ρ_h(x) = ρ_1(x, 0), continued to complex x.
inline cplx rho_h(cplx x) { return rho_one_inside(x, 0.0); }

inline double hole_density(double lambda) { return rho_h(lambda).real(); }

/// |ρ(λ) + ∫_ℝ K(λ−ν)ρ(ν)dν − K_a(λ−μ)| for a candidate ρ(·) = f(·, μ).
template <class F>
double lieb_residual(F&& f, double a, cplx lambda, cplx mu, const QuadOptions& o = {}) {
    const cplx conv = integrate_line([&](cplx nu) { return kernel_K(lambda - nu) * f(nu, mu); }, 0.0, o);
    return std::abs(f(lambda, mu) + conv - kernel_K(lambda - mu, a));
}

inline double lieb_residual(double a, cplx lambda, cplx mu, const QuadOptions& o = {}) {
    return lieb_residual([a](cplx l, cplx m) { return density(a, l, m); }, a, lambda, mu, o);
}

struct Factorization {
    cplx lhs;  // ρ_1(λ, μ−i/2) + ρ_1(λ, μ+i/2)
    cplx rhs;  // K_{1/2}(λ−μ)
    cplx value() const { return rhs; }
    double mismatch() const { return std::abs(lhs - rhs); }
};

/// Close-pair factorisation ρ_1(λ, μ−i/2) + ρ_1(λ, μ+i/2) = K_{1/2}(λ−μ), |Im μ| < 1/2.
inline Factorization close_pair_factorization(cplx lambda, cplx mu, double tol = 1e-9) {
    if (std::abs(mu.imag()) >= 0.5 - tol) throw Error(ErrorCode::BranchBoundary, "close-pair factorisation needs |Im mu| < 1/2");
    const cplx h(0.0, 0.5);
    return {density(1.0, lambda, mu - h, tol) + density(1.0, lambda, mu + h, tol), kernel_K(lambda - mu, 0.5)};
}

// ------------------------------------------------------------ convolutions

struct ConvolutionRow {
    std::string name;
    double max_error = 0.0;
    int draws = 0;
    bool exact_zero = false;
    double contour_alpha = 0.0;
};

struct ConvolutionReport {
    std::vector<ConvolutionRow> rows;
    double max_error() const {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.max_error);
        return m;
    }
};

namespace detail {

struct ConvolutionDraw {
    double lambda, theta;
    cplx c, cb, w, wb;
};

inline ConvolutionDraw draw_parameters(std::mt19937& rng) {
    std::uniform_real_distribution<double> re(-1.5, 1.5), small(-0.15, 0.15), wide(0.8, 1.3), line(-2.0, 2.0);
    ConvolutionDraw d;
    d.lambda = line(rng);
    d.theta = line(rng);
    d.c = {re(rng), small(rng)};
    d.cb = {re(rng), small(rng)};
    d.w = {re(rng), wide(rng)};
    d.wb = {re(rng), wide(rng)};
    return d;
}

struct ConvolutionSpec {
    const char* name;
    bool shifted;  // integrate along ℝ + iα instead of ℝ
    bool zero;
    cplx (*integrand)(const ConvolutionDraw&, cplx);
    cplx (*closed)(const ConvolutionDraw&);
};

inline const std::vector<ConvolutionSpec>& convolution_specs() {
    using D = ConvolutionDraw;
    static const cplx i(0.0, 1.0), h(0.0, 0.5);
    static const std::vector<ConvolutionSpec> specs{
        {"Kc*rho_half", true, false,
         [](const D& d, cplx n) { return kernel_Kc(d.c - n) * rho_half_inside(n, d.lambda + h); },
         [](const D& d) { return kernel_K(d.c - h - d.lambda); }},
        {"Kc*rho_1", false, false, [](const D& d, cplx n) { return kernel_Kc(d.c - n) * rho_one_inside(n, d.theta); },
         [](const D& d) { return kernel_K(d.c - d.theta, 1.5); }},
        {"Kc*rho_tilde(close)", false, false, [](const D& d, cplx n) { return kernel_Kc(d.c - n) * rho_tilde(n - d.cb); },
         [](const D& d) { return kernel_K(d.c - d.cb) + kernel_K(d.c - d.cb, 2.0); }},
        {"Kc*rho_tilde(wide)", false, false, [](const D& d, cplx n) { return kernel_Kc(d.c - n) * rho_tilde(n - d.w); },
         [](const D& d) { return kernel_K(d.c - d.w - i); }},
        {"Kc*rho_tilde(wide conj)", false, false,
         [](const D& d, cplx n) { return kernel_Kc(d.c - n) * rho_tilde(n - std::conj(d.w)); },
         [](const D& d) { return kernel_K(d.c - std::conj(d.w) + i); }},
        {"K(w+)*rho_half", true, false,
         [](const D& d, cplx n) { return kernel_K(d.w + h - n) * rho_half_inside(n, d.lambda + h); },
         [](const D& d) { return kernel_K(d.w - d.lambda, 0.5); }},
        {"K(w-)*rho_half", true, false,
         [](const D& d, cplx n) { return kernel_K(std::conj(d.w) - h - n) * rho_half_inside(n, d.lambda + h); },
         [](const D& d) { return kernel_K(std::conj(d.w) - i - d.lambda, 0.5); }},
        {"K(w+)*rho_1", false, false, [](const D& d, cplx n) { return kernel_K(d.w + h - n) * rho_one_inside(n, d.theta); },
         [](const D& d) { return kernel_K(d.w - d.theta + i, 0.5); }},
        {"K(w-)*rho_1", false, false,
         [](const D& d, cplx n) { return kernel_K(std::conj(d.w) - h - n) * rho_one_inside(n, d.theta); },
         [](const D& d) { return kernel_K(std::conj(d.w) - d.theta - i, 0.5); }},
        {"K(w+)*rho_tilde(close)", false, false,
         [](const D& d, cplx n) { return kernel_K(d.w + h - n) * rho_tilde(n - d.cb); },
         [](const D& d) { return kernel_K(d.w - d.cb + i); }},
        {"K(w-)*rho_tilde(close)", false, false,
         [](const D& d, cplx n) { return kernel_K(std::conj(d.w) - h - n) * rho_tilde(n - d.cb); },
         [](const D& d) { return kernel_K(std::conj(d.w) - d.cb - i); }},
        {"K(w+)*rho_tilde(w)", false, true, [](const D& d, cplx n) { return kernel_K(d.w + h - n) * rho_tilde(n - d.wb); },
         [](const D&) { return cplx(0.0); }},
        {"K(w+)*rho_tilde(w conj)", false, false,
         [](const D& d, cplx n) { return kernel_K(d.w + h - n) * rho_tilde(n - std::conj(d.wb)); },
         [](const D& d) { return kernel_K(d.w - std::conj(d.wb) + i) - kernel_K(d.w - std::conj(d.wb)); }},
        {"K(w-)*rho_tilde(w)", false, false,
         [](const D& d, cplx n) { return kernel_K(std::conj(d.w) - h - n) * rho_tilde(n - d.wb); },
         [](const D& d) { return kernel_K(std::conj(d.w) - d.wb - i) - kernel_K(std::conj(d.w) - d.wb); }},
        {"K(w-)*rho_tilde(w conj)", false, true,
         [](const D& d, cplx n) { return kernel_K(std::conj(d.w) - h - n) * rho_tilde(n - std::conj(d.wb)); },
         [](const D&) { return cplx(0.0); }},
    };
    return specs;
}

inline ConvolutionRow check_convolution(std::size_t idx, unsigned seed, int draws, const QuadOptions& o) {
    const auto& s = convolution_specs()[idx];
    std::mt19937 rng(seed + 7919u * static_cast<unsigned>(idx));
    ConvolutionRow row{s.name, 0.0, draws, s.zero, s.shifted ? o.alpha : 0.0};
    for (int k = 0; k < draws; ++k) {
        const auto d = draw_parameters(rng);
        const cplx v = integrate_line([&](cplx n) { return s.integrand(d, n); }, row.contour_alpha, o);
        row.max_error = std::max(row.max_error, std::abs(v - s.closed(d)));
    }
    return row;
}

}  // namespace detail

/// Evaluates every convolution identity by quadrature at `draws` random
/// parameter sets and reports the largest absolute error per identity.
/// Rows are independent and may run on `threads` workers; the order is fixed.
inline ConvolutionReport convolution_table_check(unsigned seed = 1, int draws = 10, const QuadOptions& o = {},
                                                 int threads = 1) {
    if (!(o.alpha > 0.0 && o.alpha < 0.3))
        throw Error(ErrorCode::InvalidArgument, "contour alpha must lie in (0, 0.3) to keep the pole layout");
    const std::size_t n = detail::convolution_specs().size();
    ConvolutionReport rep;
    rep.rows.resize(n);
    if (threads <= 1) {
        for (std::size_t k = 0; k < n; ++k) rep.rows[k] = detail::check_convolution(k, seed, draws, o);
        return rep;
    }
    std::vector<std::future<ConvolutionRow>> jobs;
    for (std::size_t k = 0; k < n; ++k) {
        jobs.push_back(std::async(std::launch::async, detail::check_convolution, k, seed, draws, o));
        if (jobs.size() >= static_cast<std::size_t>(threads) || k + 1 == n) {
            const std::size_t first = k + 1 - jobs.size();
            for (std::size_t j = 0; j < jobs.size(); ++j) rep.rows[first + j] = jobs[j].get();
            jobs.clear();
        }
    }
    return rep;
}

// ---------------------------------------------------- condensation property

struct CondensationCheck {
    cplx sum;       // (1/M) Σ_j g(λ_j)
    cplx integral;  // ∫_{ℝ+iα} g ρ_g
    cplx residues;  // 2πi Σ ρ_g(z)/(1+𝔞_g(z)) res g(z), poles with |Im z| < α
    double error() const { return std::abs(sum - integral - residues); }
};

/// Generalised condensation for g(λ) = K(λ − z) over the ground-state roots.
inline CondensationCheck condensation_check(const BetheState<double>& ground, cplx z, double alpha,
                                            const QuadOptions& o = {}) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw Error(ErrorCode::InvalidArgument, "alpha must stay below the poles of rho_g");
    const cplx i(0.0, 1.0);
    CondensationCheck c{};
    for (const auto& r : ground.roots) c.sum += kernel_K(r - z);
    c.sum /= double(ground.M);
    c.integral = integrate_line([&](cplx l) { return kernel_K(l - z) * rho_g(l); }, alpha, o);
    // K(λ − z) has residues ±1/(2πi) at λ = z ± i.
    for (int s : {+1, -1}) {
        const cplx p = z + double(s) * i;
        if (std::abs(p.imag()) >= alpha) continue;
        c.residues += 2.0 * M_PI * i * rho_g(p) / (1.0 + counting_fn(ground, p)) * (double(s) / (2.0 * M_PI * i));
    }
    return c;
}

// ------------------------------------------------------ higher-level system

struct HigherLevelSystem {
    std::vector<double> holes;
    std::vector<cplx> roots;
    ComplexMatrix gamma;    // Γ̃
    ComplexMatrix density;  // 𝒟̃^h
    ComplexMatrix H;        // Γ̃⁻¹ 𝒟̃^h

    double residual() const {
        if (roots.empty()) return 0.0;
        return (gamma * H - density).cwiseAbs().maxCoeff();
    }
};

/// Γ̃_ab = ã'(μ̃_a)δ_ab − 2πiK(μ̃_a − μ̃_b), 𝒟̃^h_ab = −2πi ρ̃(μ̃_a − θ_b), ℋ = Γ̃⁻¹𝒟̃^h.
inline HigherLevelSystem make_higher_level_system(std::vector<double> holes, std::vector<cplx> roots) {
    HigherLevelSystem s;
    s.holes = std::move(holes);
    s.roots = std::move(roots);
    const auto n = static_cast<Eigen::Index>(s.roots.size()), nh = static_cast<Eigen::Index>(s.holes.size());
    const cplx two_pi_i(0.0, 2.0 * M_PI);
    s.gamma = ComplexMatrix::Zero(n, n);
    s.density = ComplexMatrix::Zero(n, nh);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) s.gamma(a, b) = -two_pi_i * kernel_K(s.roots[a] - s.roots[b]);
        s.gamma(a, a) += higher_level_counting_derivative(s.holes, s.roots, static_cast<std::size_t>(a));
        for (Eigen::Index b = 0; b < nh; ++b) s.density(a, b) = -two_pi_i * rho_tilde(s.roots[a] - s.holes[b]);
    }
    s.H = n ? lu_solve_refined<cplx>(s.gamma, s.density) : ComplexMatrix(0, nh);
    return s;
}

/// Higher-level system for a classified excited state: the branch of the
/// higher-level equations closest to the finite-size centres, ordered like them.
inline HigherLevelSystem higher_level_for(const DLClassification& cls) {
    const auto& target = cls.higher_roots;
    if (target.empty()) return make_higher_level_system(cls.holes, {});
    const auto sol = solve_higher_level(cls.holes, static_cast<int>(target.size()));
    if (sol.branches.empty()) throw Error(ErrorCode::NonConvergence, "no solution of the higher-level equations");
    std::vector<cplx> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& br : sol.branches) {
        std::vector<cplx> ordered;
        std::vector<bool> used(br.size(), false);
        double d = 0.0;
        for (const auto& t : target) {
            std::size_t k = br.size();
            for (std::size_t m = 0; m < br.size(); ++m)
                if (!used[m] && (k == br.size() || std::abs(br[m] - t) < std::abs(br[k] - t))) k = m;
            used[k] = true;
            ordered.push_back(br[k]);
            d += std::abs(br[k] - t);
        }
        if (d < best_d) {
            best_d = d;
            best = ordered;
        }
    }
    return make_higher_level_system(cls.holes, best);
}

// ------------------------------------------------------ perturbed Cauchy matrices

namespace detail {

enum class ColumnKind { real, pair_plus, pair_minus, wide_upper, wide_lower };

struct ColumnRole {
    ColumnKind kind = ColumnKind::real;
    cplx center{};     // pair centre or wide w
    cplx delta{};      // pair deviation
    std::size_t partner = 0;
    std::size_t higher = 0;  // index into the higher-level roots
};

inline std::vector<ColumnRole> column_roles(const BetheState<double>& excited, const DLClassification& cls) {
    std::vector<ColumnRole> roles(excited.roots.size());
    std::size_t h = 0;
    auto add_pair = [&](const ClosePairInfo& p) {
        roles[p.plus] = {ColumnKind::pair_plus, p.center, p.delta, p.minus, h};
        roles[p.minus] = {ColumnKind::pair_minus, p.center, p.delta, p.plus, h};
        ++h;
    };
    for (const auto& p : cls.close_pairs) add_pair(p);
    for (const auto& q : cls.quartets) {
        add_pair(q.first);
        add_pair(q.second);
    }
    for (const auto& w : cls.wide_pairs) {
        roles[w.upper] = {ColumnKind::wide_upper, w.w, {}, w.lower, h};
        roles[w.lower] = {ColumnKind::wide_lower, w.w, {}, w.upper, h + 1};
        h += 2;
    }
    return roles;
}

// π[1/sinh π(λ₊−x) + 1/sinh π(λ₋−x)] with λ± = c ± i(1/2 + δ), in a form that
// cancels exactly at δ = 0.
inline cplx pair_sinh_sum(cplx c, cplx delta, cplx x) {
    const cplx i(0.0, 1.0);
    const cplx A = M_PI * (c + i * (0.5 + delta) - x);
    return -2.0 * M_PI * i * std::sin(M_PI * delta) * std::cosh(A - i * M_PI * delta) /
           (std::sinh(A) * std::sinh(A - 2.0 * M_PI * i * delta));
}

}  // namespace detail

/// Closed-form ℱ_g: rows are ground roots, columns follow the excited roots in
/// state order and end with the i/2 column, matching the finite extraction.
inline ComplexMatrix build_F_g(const BetheState<double>& ground, const BetheState<double>& excited,
                               const DLClassification& cls) {
    using detail::ColumnKind;
    const cplx i(0.0, 1.0), h(0.0, 0.5);
    const auto roles = detail::column_roles(excited, cls);
    const auto n = static_cast<Eigen::Index>(ground.roots.size());
    const auto m = static_cast<Eigen::Index>(excited.roots.size());
    ComplexMatrix F(n, m + 1);
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx l = ground.roots[j];
        const cplx ad = counting_fn_derivative_at_root(ground, static_cast<std::size_t>(j));
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto& r = roles[k];
            const cplx g = excited.roots[k];
            switch (r.kind) {
                case ColumnKind::real:
                    F(j, k) = (1.0 + counting_fn(ground, g)) / ad * M_PI / std::sinh(M_PI * (g - l));
                    break;
                case ColumnKind::pair_plus:
                    F(j, k) = M_PI / (ad * std::sinh(M_PI * (r.center + h - l)));
                    break;
                case ColumnKind::pair_minus:
                    F(j, k) = counting_fn(ground, g) / ad * detail::pair_sinh_sum(r.center, r.delta, l) +
                              2.0 * M_PI * i / ad * (density(1.0, l, r.center + h) - density(1.0, l, r.center - h));
                    break;
                case ColumnKind::wide_upper:
                    F(j, k) = 2.0 * M_PI * i / ad * (density(0.5, l, r.center + i) - density(0.5, l, r.center));
                    break;
                case ColumnKind::wide_lower: {
                    const cplx wb = std::conj(r.center);
                    F(j, k) = 2.0 * M_PI * i / ad * (density(0.5, l, wb) - density(0.5, l, wb - i));
                    break;
                }
            }
        }
        F(j, m) = M_PI / (ad * std::sinh(M_PI * (h - l)));
    }
    return F;
}

/// Closed-form (ℱ_e | 𝓦): rows are the ground roots and i/2, columns follow
/// the excited roots in state order, then the two Foda–Wheeler columns.
/// G_e(θ, λ̌) is replaced by its decoupled value π(1+𝔞_e(λ̌))/sinh π(λ̌−θ).
inline ComplexMatrix build_F_e(const BetheState<double>& excited, const BetheState<double>& ground,
                               const DLClassification& cls, const HigherLevelSystem& higher) {
    using detail::ColumnKind;
    const cplx i(0.0, 1.0), h(0.0, 0.5);
    const auto roles = detail::column_roles(excited, cls);
    const auto& th = cls.holes;
    std::vector<cplx> ad_hole;
    for (double t : th) ad_hole.push_back(counting_fn_derivative(excited, cplx(t)));
    std::vector<cplx> rows = ground.roots;
    rows.push_back(h);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(excited.roots.size());
    ComplexMatrix F(n, m + 2);
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx x = rows[j];
        const cplx a = counting_fn(excited, x);
        const cplx pref = M_PI * (1.0 + a);
        std::vector<cplx> inv_sh;
        for (double t : th) inv_sh.push_back(1.0 / std::sinh(M_PI * (x - t)));
        // Σ_b ρ_h(γ−θ_b)/𝔞'_e(θ_b)/sinh π(λ̌−θ_b)
        auto hole_sum = [&](cplx g) {
            cplx s = 0.0;
            for (std::size_t b = 0; b < th.size(); ++b) s += rho_h(g - th[b]) / ad_hole[b] * inv_sh[b];
            return s;
        };
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto& r = roles[k];
            switch (r.kind) {
                case ColumnKind::real: {
                    const cplx g = excited.roots[k];
                    const cplx ad = counting_fn_derivative_at_root(excited, static_cast<std::size_t>(k));
                    F(j, k) = pref / ad * (1.0 / std::sinh(M_PI * (x - g)) - 2.0 * M_PI * i * hole_sum(g));
                    break;
                }
                case ColumnKind::pair_plus: {
                    const cplx cp = r.center + h;
                    F(j, k) = pref * (1.0 / std::sinh(M_PI * (x - cp)) - 2.0 * M_PI * i * hole_sum(cp));
                    break;
                }
                default: {
                    cplx s = 0.0;
                    for (std::size_t b = 0; b < th.size(); ++b)
                        s += higher.H(static_cast<Eigen::Index>(r.higher), static_cast<Eigen::Index>(b)) * inv_sh[b];
                    F(j, k) = pref * s;
                }
            }
        }
        F(j, m) = a - 1.0;
        F(j, m + 1) = a * (x + i) - x;
    }
    return F;
}

// ------------------------------------------------------ thermodynamic form factor

struct ThermoOptions {
    double bulk_cutoff = 2.5;
};

struct ThermoFormFactorResult {
    FormFactorResult ff;
    LogValue asymptotic_prefactor;  // M^{−n_h} S({θ}) × rational factor in μ̃, θ
    std::vector<double> holes;
    double higher_residual = 0.0;
};

/// M^{−n_h} S({θ}) ∏_{a,b}(μ̃_a−θ_b−i/2) / (∏_{a,b}(μ̃_a−μ̃_b−i) ∏_{a<b}(θ_a−θ_b)).
inline LogValue asymptotic_prefactor(int M, const std::vector<double>& holes, const std::vector<cplx>& mu) {
    const cplx i(0.0, 1.0);
    LogValue v = spinon_scattering_factor(holes);
    v.log_abs -= double(holes.size()) * std::log(double(M));
    for (const auto& m : mu)
        for (double t : holes) v *= LogValue::from(m - t - 0.5 * i);
    for (const auto& a : mu)
        for (const auto& b : mu) v /= LogValue::from(a - b - i);
    for (std::size_t a = 0; a < holes.size(); ++a)
        for (std::size_t b = a + 1; b < holes.size(); ++b) v /= LogValue::from(holes[a] - holes[b]);
    return v;
}

/// |F_z|² from the closed-form perturbed Cauchy matrices at finite M.
inline ThermoFormFactorResult thermo_form_factor(const BetheState<double>& ground, const BetheState<double>& excited,
                                                 const ThermoOptions& opt = {}) {
    ThermoFormFactorResult out;
    auto& res = out.ff;
    res.pipeline = "thermo";
    auto& d = res.diagnostics;
    for (const auto& p : excited.pairs) d.deltas.push_back(p.delta);
    if (ground.M != excited.M || ground.N() != excited.N() + 1) {
        d.selection_rule_zero = true;
        d.notes.push_back("states not related by one S^- step: selection rule");
        res.log_value = LogValue::from(0.0);
        return out;
    }
    const auto cls = classify(excited);
    out.holes = cls.holes;
    for (double t : cls.holes)
        if (std::abs(t) > opt.bulk_cutoff) d.holes_outside_bulk = true;
    if (d.holes_outside_bulk) d.notes.push_back("HolesOutsideBulk: a hole lies beyond the bulk cutoff");
    const auto higher = higher_level_for(cls);
    out.higher_residual = higher.residual();
    d.ground_residual = max_abs<double>(bethe_residuals(ground));
    if (!excited.deviation_frozen) d.excited_residual = max_abs<double>(bethe_residuals(excited));

    const LogValue pre = form_factor_prefactor(ground, excited);
    d.prefactor_log_abs = pre.log_abs;
    const ComplexMatrix fg = build_F_g(ground, excited, cls);
    const ComplexMatrix fe = build_F_e(excited, ground, cls, higher);
    d.cond_slavnov_g = condition_estimate(fg);
    d.cond_slavnov_e = condition_estimate(fe);
    d.ill_conditioned = d.cond_slavnov_g > kIllConditioned || d.cond_slavnov_e > kIllConditioned;
    if (d.ill_conditioned) d.notes.push_back("IllConditioned: condition estimate above 1e12");
    const LogValue v = pre * log_det(fg) * log_det(fe);
    res.log_value = v;
    res.raw = v.value();
    res.value = res.raw.real();
    d.imag_ratio = std::abs(res.raw) > 0 ? std::abs(res.raw.imag()) / std::abs(res.raw) : 0.0;
    if (cls.n_h() > 0) out.asymptotic_prefactor = asymptotic_prefactor(ground.M, cls.holes, higher.roots);
    return out;
}

}  // namespace bethexx
