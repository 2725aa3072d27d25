#pragma once

#include "core.hpp"
#include "errors.hpp"
#include "linalg.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

namespace bethexx {

// ------------------------------------------------------------ Takahashi

/// θ_n(x) = 2 arctan(2x/n) and its derivative.
inline double theta_n(double x, int n) { return 2.0 * std::atan(2.0 * x / n); }
inline double dtheta_n(double x, int n) { return 4.0 * n / (double(n) * n + 4.0 * x * x); }

/// String–string phase Θ_{nm}: θ_{|n−m|} (absent when n = m) + 2θ_{|n−m|+2} + … + 2θ_{n+m−2} + θ_{n+m}.
inline double string_phase(int n, int m, double x, bool derivative = false) {
    auto f = [&](int k) { return derivative ? dtheta_n(x, k) : theta_n(x, k); };
    double s = 0.0;
    if (n != m) s += f(std::abs(n - m));
    for (int k = std::abs(n - m) + 2; k < n + m; k += 2) s += 2.0 * f(k);
    return s + f(n + m);
}

/// Largest admissible |I| for strings of length n given counts M_1, M_2.
inline double takahashi_bound(int M, int n, int M1, int M2) {
    const int t1 = 2 * std::min(n, 1) - (n == 1 ? 1 : 0);
    const int t2 = 2 * std::min(n, 2) - (n == 2 ? 1 : 0);
    return 0.5 * (M - 1 - t1 * M1 - t2 * M2);
}

/// All admissible quantum numbers for n-strings, ascending. They are integers
/// when M − M_n is odd, half-odd otherwise.
inline std::vector<double> vacancy_ladder(int M, int n, int M1, int M2) {
    const double Imax = takahashi_bound(M, n, M1, M2);
    std::vector<double> out;
    if (Imax < 0) return out;
    const int Mn = n == 1 ? M1 : M2;
    const bool integer = (M - Mn) % 2 != 0;
    const double start = -Imax;
    const double frac = std::abs(start - std::round(start));
    const bool ok = integer ? frac < 1e-9 : std::abs(frac - 0.5) < 1e-9;
    if (!ok) return out;
    for (double I = start; I <= Imax + 1e-9; I += 1.0) out.push_back(I);
    return out;
}

struct TakahashiResult {
    std::vector<double> x;  // string centres, same order as the input
    double residual = 0.0;
    int iterations = 0;
};

/// Newton on the string-centre equations
///   M θ_n(x_α) − Σ_{β≠α} Θ_{n_α n_β}(x_α − x_β) = 2π I_α,
/// with step halving on residual increase.
inline TakahashiResult solve_takahashi(int M, const std::vector<int>& len, const std::vector<double>& qn,
                                       std::vector<double> x, double tol = 1e-13, int max_iter = 200) {
    const std::size_t n = x.size();
    auto residual = [&](const std::vector<double>& y) {
        Eigen::VectorXd F(static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a) {
            double s = M * theta_n(y[a], len[a]) - 2.0 * M_PI * qn[a];
            for (std::size_t b = 0; b < n; ++b)
                if (b != a) s -= string_phase(len[a], len[b], y[a] - y[b]);
            F(static_cast<Eigen::Index>(a)) = s;
        }
        return F;
    };
    TakahashiResult r;
    Eigen::VectorXd F = residual(x);
    double fn = n ? F.cwiseAbs().maxCoeff() : 0.0;
    for (int it = 0; it < max_iter && fn > tol; ++it) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a) {
            double d = M * dtheta_n(x[a], len[a]);
            for (std::size_t b = 0; b < n; ++b) {
                if (b == a) continue;
                const double k = string_phase(len[a], len[b], x[a] - x[b], true);
                d -= k;
                J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = k;
            }
            J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = d;
        }
        const Eigen::VectorXd step = J.partialPivLu().solve(F);
        double lam = 1.0;
        bool accepted = false;
        for (int h = 0; h <= 20; ++h, lam *= 0.5) {
            std::vector<double> y(n);
            for (std::size_t a = 0; a < n; ++a) y[a] = x[a] - lam * step(static_cast<Eigen::Index>(a));
            const Eigen::VectorXd Fy = residual(y);
            const double fy = Fy.cwiseAbs().maxCoeff();
            if (std::isfinite(fy) && fy < fn) {
                x = std::move(y);
                F = Fy;
                fn = fy;
                accepted = true;
                break;
            }
        }
        r.iterations = it + 1;
        if (!accepted) break;
    }
    r.x = std::move(x);
    r.residual = fn;
    return r;
}

/// Initial 1-string guess from the ground-state density 1/(2 cosh πλ).
inline double density_guess(double I, double Imax) {
    const double f = std::clamp(I / (Imax + 1.0), -0.999, 0.999);
    return std::asinh(std::tan(0.5 * M_PI * f)) / M_PI;
}

// --------------------------------------------------------- ground state

struct SolveOptions {
    double tol = 1e-12;        // log-equation residual
    double on_shell_tol = 1e-10;
    int max_iter = 200;
    int Mstar = 48;            // deviations frozen above this chain length
    bool extended_fallback = true;
};

inline BetheState<double> solve_real_roots(int M, const std::vector<double>& qn, const SolveOptions& opt = {}) {
    const std::size_t N = qn.size();
    const double Imax = N ? std::max(std::abs(qn.front()), std::abs(qn.back())) : 0.0;
    std::vector<double> x0(N);
    for (std::size_t j = 0; j < N; ++j) x0[j] = density_guess(qn[j], Imax);
    const auto r = solve_takahashi(M, std::vector<int>(N, 1), qn, x0, opt.tol, opt.max_iter);
    if (!(r.residual <= opt.tol))
        throw Error(ErrorCode::NonConvergence, "real-root Newton stalled, residual " + std::to_string(r.residual));
    BetheState<double> st;
    st.M = M;
    st.tolerance = opt.on_shell_tol;
    for (double v : r.x) st.roots.emplace_back(v, 0.0);
    mark_on_shell(st);
    return st;
}

inline std::vector<double> ground_quantum_numbers(int M) {
    const int N = M / 2;
    std::vector<double> qn(N);
    for (int j = 0; j < N; ++j) qn[j] = -0.5 * (N - 1) + j;
    return qn;
}

/// Every real-root state with N roots that the solver reaches: all strictly
/// increasing quantum-number sets with |I| ≤ (M−N−1)/2. Sets whose Newton
/// iteration fails (the state needs complex roots) are skipped; states with
/// coinciding roots are dropped.
inline std::vector<BetheState<double>> enumerate_real_states(int M, int N, const SolveOptions& opt = {}) {
    if (M < 2 || M % 2 != 0 || N < 0 || 2 * N > M) throw Error(ErrorCode::InvalidArgument, "need even M and 0 <= 2N <= M");
    const int slots = M - N;
    std::vector<BetheState<double>> out;
    std::vector<int> pick(N);
    for (int j = 0; j < N; ++j) pick[j] = j;
    while (true) {
        std::vector<double> qn(N);
        for (int j = 0; j < N; ++j) qn[j] = -0.5 * (slots - 1) + pick[j];
        try {
            auto st = solve_real_roots(M, qn, opt);
            bool distinct = true;
            for (std::size_t j = 1; j < st.roots.size(); ++j)
                distinct = distinct && std::abs(st.roots[j] - st.roots[j - 1]) > 1e-8;
            if (st.on_shell && distinct) out.push_back(std::move(st));
        } catch (const Error&) {
        }
        int k = N - 1;
        while (k >= 0 && pick[k] == slots - N + k) --k;
        if (k < 0) break;
        ++pick[k];
        for (int j = k + 1; j < N; ++j) pick[j] = pick[j - 1] + 1;
    }
    return out;
}

/// M/2 real roots with consecutive quantum numbers. For M = 2 the single
/// root sits at λ = 0.
inline BetheState<double> solve_ground_state(int M, const SolveOptions& opt = {}) {
    if (M < 2 || M % 2 != 0 || M > 4096) throw Error(ErrorCode::InvalidArgument, "ground state needs even 2 <= M <= 4096");
    return solve_real_roots(M, ground_quantum_numbers(M), opt);
}

// ------------------------------------------------------- counting function

/// Real-axis counting function Z(x) = M·2atan(2x) − Σ_k 2atan(x − λ_k),
/// complex arctangent for non-real roots (continuous for |Im(x−λ)| < 1).
inline double counting_phase(const BetheState<double>& st, double x) {
    cplx s = double(st.M) * theta_n(x, 1);
    for (const auto& r : st.roots) s -= 2.0 * std::atan(cplx(x) - r);
    return s.real();
}

/// Solves Z(θ) = 2π I on the real line.
inline double locate_by_counting(const BetheState<double>& st, double I) {
    auto f = [&](double x) { return counting_phase(st, x) - 2.0 * M_PI * I; };
    double lo = -4.0, hi = 4.0;
    while (f(lo) > 0 && lo > -1e7) lo *= 4.0;
    while (f(hi) < 0 && hi < 1e7) hi *= 4.0;
    if (f(lo) > 0) return -std::numeric_limits<double>::infinity();
    if (f(hi) < 0) return std::numeric_limits<double>::infinity();
    boost::uintmax_t it = 200;
    auto res = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), it);
    return 0.5 * (res.first + res.second);
}

// --------------------------------------------------------- classification

struct ClosePairInfo {
    cplx center;
    cplx delta;
    std::size_t plus = 0, minus = 0;
};

struct WidePairInfo {
    cplx w;  // roots are w + i/2 and w̄ − i/2
    std::size_t upper = 0, lower = 0;
};

struct DLClassification {
    std::vector<double> real_roots;
    std::vector<ClosePairInfo> close_pairs;  // 2-strings only
    std::vector<std::pair<ClosePairInfo, ClosePairInfo>> quartets;
    std::vector<WidePairInfo> wide_pairs;
    std::vector<double> holes;
    std::vector<double> hole_quantum_numbers;
    std::vector<double> real_quantum_numbers;
    std::vector<cplx> higher_roots;

    int n_r() const { return int(real_roots.size()); }
    int n_2s() const { return int(close_pairs.size()); }
    int n_q() const { return int(quartets.size()); }
    int n_w() const { return int(wide_pairs.size()); }
    int n_h() const { return int(holes.size()); }
    int n_tilde() const { return n_2s() + 2 * n_q() + 2 * n_w(); }
    double spin() const { return 0.5 * n_h() - n_tilde(); }
};

/// Destri–Lowenstein partition. Members of a close pair differ by ≈ i; wide
/// pairs have |Im λ| > 1 (Im w > 1/2); roots within `tol` of |Im λ| = 1 are
/// ambiguous and reported.
inline DLClassification classify(const BetheState<double>& st, double tol = 1e-8) {
    DLClassification cls;
    const std::size_t n = st.roots.size();
    std::vector<bool> used(n, false);
    std::vector<std::size_t> real_idx;
    const cplx i(0.0, 1.0);

    // Recorded pairs first: they carry the exact deviation.
    std::vector<ClosePairInfo> pairs;
    for (const auto& p : st.pairs) {
        pairs.push_back({to_double(p.center), to_double(p.delta), p.plus, p.minus});
        used[p.plus] = used[p.minus] = true;
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        const cplx r = st.roots[j];
        if (std::abs(r.imag()) < tol) {
            used[j] = true;
            real_idx.push_back(j);
            continue;
        }
        if (std::abs(std::abs(r.imag()) - 1.0) < tol)
            throw Error(ErrorCode::AmbiguousBoundary, "root within tolerance of |Im| = 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (used[j] || st.roots[j].imag() < 0) continue;
        const cplx r = st.roots[j];
        // close pair partner: r − i
        std::size_t best = n;
        double bd = 0.25;
        for (std::size_t k = 0; k < n; ++k) {
            if (used[k] || k == j) continue;
            const double d = std::abs(r - st.roots[k] - i);
            if (d < bd) {
                bd = d;
                best = k;
            }
        }
        if (best < n && r.imag() < 1.0 + tol) {
            const cplx lm = st.roots[best];
            pairs.push_back({0.5 * (r + lm), (r - lm) / (2.0 * i) - 0.5, j, best});
            used[j] = used[best] = true;
            continue;
        }
        if (r.imag() > 1.0) {
            std::size_t conj_k = n;
            for (std::size_t k = 0; k < n; ++k)
                if (!used[k] && k != j && std::abs(st.roots[k] - std::conj(r)) < 1e-6 * (1.0 + std::abs(r))) conj_k = k;
            if (conj_k == n) throw Error(ErrorCode::UnpairedComplexRoot, "wide root without conjugate");
            cls.wide_pairs.push_back({r - 0.5 * i, j, conj_k});
            used[j] = used[conj_k] = true;
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        if (!used[j]) throw Error(ErrorCode::UnpairedComplexRoot, "complex root without partner");

    // 2-strings have (nearly) real centres; the rest pair up into quartets.
    std::vector<bool> qused(pairs.size(), false);
    for (std::size_t a = 0; a < pairs.size(); ++a) {
        if (qused[a]) continue;
        if (std::abs(pairs[a].center.imag()) < 1e-6) {
            cls.close_pairs.push_back(pairs[a]);
            qused[a] = true;
            continue;
        }
        std::size_t mate = pairs.size();
        for (std::size_t b = a + 1; b < pairs.size(); ++b)
            if (!qused[b] && std::abs(pairs[b].center - std::conj(pairs[a].center)) < 1e-6) mate = b;
        if (mate == pairs.size()) throw Error(ErrorCode::UnpairedComplexRoot, "close pair without conjugate partner");
        auto up = pairs[a], dn = pairs[mate];
        if (up.center.imag() < 0) std::swap(up, dn);
        cls.quartets.push_back({up, dn});
        qused[a] = qused[mate] = true;
    }

    for (auto j : real_idx) cls.real_roots.push_back(st.roots[j].real());
    std::sort(cls.real_roots.begin(), cls.real_roots.end());

    // Holes: vacant 1-string quantum numbers, located by the counting function.
    const int M1 = cls.n_r();
    const int M2 = cls.n_2s() + 2 * cls.n_q() + 2 * cls.n_w();
    const auto ladder = vacancy_ladder(st.M, 1, M1, M2);
    std::vector<double> taken;
    for (double g : cls.real_roots) taken.push_back(counting_phase(st, g) / (2.0 * M_PI));
    cls.real_quantum_numbers = taken;
    for (double I : ladder) {
        const bool occ = std::any_of(taken.begin(), taken.end(), [&](double t) { return std::abs(t - I) < 1e-6; });
        if (!occ) {
            cls.hole_quantum_numbers.push_back(I);
            cls.holes.push_back(locate_by_counting(st, I));
        }
    }
    for (const auto& p : cls.close_pairs) cls.higher_roots.push_back(p.center);
    for (const auto& q : cls.quartets) {
        cls.higher_roots.push_back(q.first.center);
        cls.higher_roots.push_back(q.second.center);
    }
    for (const auto& w : cls.wide_pairs) {
        cls.higher_roots.push_back(w.w);
        cls.higher_roots.push_back(std::conj(w.w));
    }
    return cls;
}

// ----------------------------------------------------- hole excitations

/// Excitation request. `holes` and `string_slots` index the vacancy ladders
/// (0 = most negative quantum number).
struct ExcitationSpec {
    int M = 0;
    std::vector<int> holes;
    int n2s = 0, nq = 0, nw = 0;
    std::vector<int> string_slots;
};

struct ExcitationPlan {
    int M1 = 0, M2 = 0;
    std::vector<double> real_qn, string_qn, hole_qn;
};

inline ExcitationPlan plan_excitation(const ExcitationSpec& spec) {
    if (spec.M < 2 || spec.M % 2 != 0) throw Error(ErrorCode::InvalidArgument, "M must be even and >= 2");
    if (spec.nq != 0 || spec.nw != 0)
        throw Error(ErrorCode::InvalidArgument, "quartet and wide-pair excitations are classified but not solved");
    if (spec.holes.size() % 2 != 0) throw Error(ErrorCode::OddHoleCount, "number of holes must be even");
    const int nh = int(spec.holes.size());
    const int rest = spec.M - nh - 2 * spec.n2s;
    if (rest < 0 || rest % 2 != 0) throw Error(ErrorCode::InvalidArgument, "inconsistent hole/string counts");
    if (nh / 2 - spec.n2s < 0) throw Error(ErrorCode::InvalidArgument, "negative total spin");
    ExcitationPlan p;
    p.M1 = rest / 2;
    p.M2 = spec.n2s;
    const auto l1 = vacancy_ladder(spec.M, 1, p.M1, p.M2);
    if (int(l1.size()) != p.M1 + nh) throw Error(ErrorCode::InvalidArgument, "vacancy count mismatch");
    std::set<int> hs(spec.holes.begin(), spec.holes.end());
    if (hs.size() != spec.holes.size()) throw Error(ErrorCode::QuantumNumberCollision, "repeated hole slot");
    for (int h : hs)
        if (h < 0 || h >= int(l1.size())) throw Error(ErrorCode::QuantumNumberCollision, "hole slot out of range");
    for (int k = 0; k < int(l1.size()); ++k) (hs.count(k) ? p.hole_qn : p.real_qn).push_back(l1[k]);
    if (p.M2 > 0) {
        const auto l2 = vacancy_ladder(spec.M, 2, p.M1, p.M2);
        if (int(l2.size()) < p.M2) throw Error(ErrorCode::InvalidArgument, "no room for the requested 2-strings");
        std::vector<int> slots = spec.string_slots;
        if (slots.empty()) {
            const int start = (int(l2.size()) - p.M2) / 2;
            for (int a = 0; a < p.M2; ++a) slots.push_back(start + a);
        }
        std::set<int> ss(slots.begin(), slots.end());
        if (int(ss.size()) != p.M2) throw Error(ErrorCode::QuantumNumberCollision, "string slots must be distinct and match n2s");
        for (int s : ss) {
            if (s < 0 || s >= int(l2.size())) throw Error(ErrorCode::QuantumNumberCollision, "string slot out of range");
            p.string_qn.push_back(l2[s]);
        }
    }
    return p;
}

struct ExcitationResult {
    BetheState<double> state;
    DLClassification classification;
    std::vector<double> real_qn, string_qn, hole_qn;
    bool extended_used = false;
    double takahashi_residual = 0.0;
};

inline ExcitationResult solve_hole_excitation(const ExcitationSpec& spec, const SolveOptions& opt = {}) {
    if (spec.n2s != 0) throw Error(ErrorCode::InvalidArgument, "hole excitation must be purely real");
    const auto p = plan_excitation(spec);
    ExcitationResult r;
    r.state = solve_real_roots(spec.M, p.real_qn, opt);
    r.real_qn = p.real_qn;
    r.hole_qn = p.hole_qn;
    r.classification = classify(r.state);
    return r;
}

// ------------------------------------------------------------ close pairs

template <class Real>
struct PairSolve {
    BetheState<Real> state;
    double residual = 0.0;
    int iterations = 0;
};

/// Full Newton for real roots γ plus close pairs c ± i(1/2 + δ) in the
/// variables (γ, c, δ). Equations: real-root products = 1, p₊p₋ = 1 and
/// δ/(1+δ) = p₊, where p± is the self-skipping product at c± without the
/// partner factor. Pair differences never appear explicitly.
template <class Real>
PairSolve<Real> solve_pairs_full(int M, std::vector<complex_t<Real>> gamma, std::vector<complex_t<Real>> centers,
                                 std::vector<complex_t<Real>> deltas, double tol, int max_iter = 100) {
    using C = complex_t<Real>;
    using std::abs;
    const std::size_t nr = gamma.size(), np = centers.size(), nv = nr + 2 * np;
    const C i(Real(0), Real(1));
    const C h = i / Real(2);

    auto pack = [&](const std::vector<C>& g, const std::vector<C>& c, const std::vector<C>& d) {
        Vector<C> z(static_cast<Eigen::Index>(nv));
        for (std::size_t k = 0; k < nr; ++k) z(static_cast<Eigen::Index>(k)) = g[k];
        for (std::size_t a = 0; a < np; ++a) {
            z(static_cast<Eigen::Index>(nr + a)) = c[a];
            z(static_cast<Eigen::Index>(nr + np + a)) = d[a];
        }
        return z;
    };
    // Root k of the expanded list: reals, then (plus, minus) per pair.
    auto roots_of = [&](const Vector<C>& z) {
        std::vector<C> r(nr + 2 * np);
        for (std::size_t k = 0; k < nr; ++k) r[k] = z(static_cast<Eigen::Index>(k));
        for (std::size_t a = 0; a < np; ++a) {
            const C s = h + i * z(static_cast<Eigen::Index>(nr + np + a));
            r[nr + 2 * a] = z(static_cast<Eigen::Index>(nr + a)) + s;
            r[nr + 2 * a + 1] = z(static_cast<Eigen::Index>(nr + a)) - s;
        }
        return r;
    };
    auto partner = [&](std::size_t k) -> std::size_t {
        if (k < nr) return std::size_t(-1);
        return (k - nr) % 2 == 0 ? k + 1 : k - 1;
    };
    // d root_k / d z_v
    auto droot = [&](std::size_t k, std::size_t v) -> C {
        if (k < nr) return C(Real(k == v ? 1 : 0));
        const std::size_t a = (k - nr) / 2;
        const bool plus = (k - nr) % 2 == 0;
        if (v == nr + a) return C(Real(1));
        if (v == nr + np + a) return plus ? i : -i;
        return C(Real(0));
    };

    // Self-skipping product (partner excluded) and its log-derivative row.
    auto product = [&](const std::vector<C>& r, std::size_t j, std::vector<C>* grad) {
        C p = vacuum_ratio_power(r[j], M);
        const std::size_t pj = partner(j);
        std::vector<C> dl(r.size(), C(Real(0)));
        dl[j] = Real(M) * (Real(1) / (r[j] - h) - Real(1) / (r[j] + h));
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k == j || k == pj) continue;
            const C a = r[j] - r[k] + i, b = r[j] - r[k] - i;
            p *= a / b;
            const C g = Real(1) / a - Real(1) / b;
            dl[j] += g;
            dl[k] -= g;
        }
        if (grad) {
            grad->assign(nv, C(Real(0)));
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (dl[k] == C(Real(0))) continue;
                for (std::size_t v = 0; v < nv; ++v) {
                    const C d = droot(k, v);
                    if (d != C(Real(0))) (*grad)[v] += dl[k] * d;
                }
            }
        }
        return p;
    };

    auto eval = [&](const Vector<C>& z, Matrix<C>* J) {
        const auto r = roots_of(z);
        Vector<C> F(static_cast<Eigen::Index>(nv));
        if (J) J->setZero(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
        std::vector<C> g1, g2;
        for (std::size_t k = 0; k < nr; ++k) {
            const C p = product(r, k, J ? &g1 : nullptr);
            F(static_cast<Eigen::Index>(k)) = p - C(Real(1));
            if (J)
                for (std::size_t v = 0; v < nv; ++v) (*J)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = p * g1[v];
        }
        for (std::size_t a = 0; a < np; ++a) {
            const std::size_t kp = nr + 2 * a, km = kp + 1;
            const C pp = product(r, kp, J ? &g1 : nullptr);
            const C pm = product(r, km, J ? &g2 : nullptr);
            const C d = z(static_cast<Eigen::Index>(nr + np + a));
            F(static_cast<Eigen::Index>(nr + a)) = pp * pm - C(Real(1));
            F(static_cast<Eigen::Index>(nr + np + a)) = d / (C(Real(1)) + d) - pp;
            if (J) {
                for (std::size_t v = 0; v < nv; ++v) {
                    (*J)(static_cast<Eigen::Index>(nr + a), static_cast<Eigen::Index>(v)) = pp * pm * (g1[v] + g2[v]);
                    (*J)(static_cast<Eigen::Index>(nr + np + a), static_cast<Eigen::Index>(v)) = -pp * g1[v];
                }
                const C opd = C(Real(1)) + d;
                (*J)(static_cast<Eigen::Index>(nr + np + a), static_cast<Eigen::Index>(nr + np + a)) += Real(1) / (opd * opd);
            }
        }
        return F;
    };
    // Scale the δ equation by 1/|δ| so tiny deviations are resolved relatively.
    auto norm_of = [&](const Vector<C>& z, const Vector<C>& F) {
        double m = 0.0;
        for (std::size_t k = 0; k < nv; ++k) {
            double v = static_cast<double>(abs(F(static_cast<Eigen::Index>(k))));
            if (k >= nr + np) {
                const double d = static_cast<double>(abs(z(static_cast<Eigen::Index>(k))));
                if (d > 0) v /= d;
            }
            m = std::max(m, v);
        }
        return m;
    };

    Vector<C> z = pack(gamma, centers, deltas);
    Matrix<C> J;
    Vector<C> F = eval(z, &J);
    double fn = norm_of(z, F);
    PairSolve<Real> out;
    int it = 0;
    for (; it < max_iter && fn > tol; ++it) {
        const Vector<C> step = lu_solve_refined<C>(J, Matrix<C>(F));
        Real lam(1);
        bool accepted = false;
        for (int hh = 0; hh <= 20; ++hh, lam /= Real(2)) {
            Vector<C> y = z - step * C(lam);
            const Vector<C> Fy = eval(y, nullptr);
            const double fy = norm_of(y, Fy);
            if (std::isfinite(fy) && fy < fn) {
                z = y;
                fn = fy;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        F = eval(z, &J);
    }
    out.iterations = it;
    out.residual = fn;
    BetheState<Real>& st = out.state;
    st.M = M;
    st.roots = roots_of(z);
    for (std::size_t a = 0; a < np; ++a)
        st.pairs.push_back({nr + 2 * a, nr + 2 * a + 1, z(static_cast<Eigen::Index>(nr + a)), z(static_cast<Eigen::Index>(nr + np + a))});
    return out;
}

/// Frozen-string seed: exact 2-strings c ± i/2 with real centres from the
/// Takahashi equations.
inline TakahashiResult solve_frozen_strings(int M, const ExcitationPlan& p, const SolveOptions& opt) {
    const std::size_t n1 = p.real_qn.size(), n2 = p.string_qn.size();
    std::vector<int> len(n1, 1);
    len.insert(len.end(), n2, 2);
    std::vector<double> qn = p.real_qn;
    qn.insert(qn.end(), p.string_qn.begin(), p.string_qn.end());
    const double Imax = takahashi_bound(M, 1, p.M1, p.M2);
    const double Jmax = takahashi_bound(M, 2, p.M1, p.M2);
    std::vector<double> x(n1 + n2);
    for (std::size_t j = 0; j < n1; ++j) x[j] = density_guess(p.real_qn[j], Imax);
    for (std::size_t a = 0; a < n2; ++a) x[n1 + a] = density_guess(p.string_qn[a], Jmax + 0.5);

    // A few sweeps: string centres by 1-d Newton with the rest held, then a
    // short coupled Newton.
    for (int sweep = 0; sweep < 3 && n2 > 0; ++sweep) {
        for (std::size_t a = 0; a < n2; ++a) {
            double c = x[n1 + a];
            for (int it = 0; it < 60; ++it) {
                double f = M * theta_n(c, 2) - 2.0 * M_PI * p.string_qn[a], df = M * dtheta_n(c, 2);
                for (std::size_t b = 0; b < n1 + n2; ++b) {
                    if (b == n1 + a) continue;
                    f -= string_phase(2, len[b], c - x[b]);
                    df -= string_phase(2, len[b], c - x[b], true);
                }
                const double s = f / df;
                c -= std::clamp(s, -0.5, 0.5);
                if (std::abs(s) < 1e-14) break;
            }
            x[n1 + a] = c;
        }
        auto rr = solve_takahashi(M, len, qn, x, 1e-10, 30);
        if (std::isfinite(rr.residual)) x = rr.x;
    }
    return solve_takahashi(M, len, qn, x, opt.tol, opt.max_iter);
}

/// Real roots plus 2-strings. Up to M* the deviations are solved exactly
/// (extended precision when |δ| < 1e-13); above M* they are frozen to 0 and
/// the state is flagged.
inline ExcitationResult solve_close_pair_state(const ExcitationSpec& spec, const SolveOptions& opt = {}) {
    const auto p = plan_excitation(spec);
    ExcitationResult out;
    out.real_qn = p.real_qn;
    out.string_qn = p.string_qn;
    out.hole_qn = p.hole_qn;
    const auto tk = solve_frozen_strings(spec.M, p, opt);
    out.takahashi_residual = tk.residual;
    if (!(tk.residual <= 1e-9)) throw Error(ErrorCode::NonConvergence, "string-centre equations did not converge");
    const std::size_t n1 = p.real_qn.size(), n2 = p.string_qn.size();
    const cplx i(0.0, 1.0);

    BetheState<double> st;
    st.M = spec.M;
    st.tolerance = opt.on_shell_tol;
    if (spec.M > opt.Mstar || n2 == 0) {
        for (std::size_t j = 0; j < n1; ++j) st.roots.emplace_back(tk.x[j], 0.0);
        for (std::size_t a = 0; a < n2; ++a) {
            const double c = tk.x[n1 + a];
            st.pairs.push_back({st.roots.size(), st.roots.size() + 1, cplx(c), cplx(0.0)});
            st.roots.push_back(c + 0.5 * i);
            st.roots.push_back(c - 0.5 * i);
        }
        if (n2 == 0) {
            mark_on_shell(st);
        } else {
            st.deviation_frozen = true;
            st.on_shell = false;
            st.max_residual = tk.residual;
        }
        out.state = std::move(st);
        out.classification = classify(out.state);
        return out;
    }

    // Seed δ from p₊ at the frozen configuration.
    std::vector<cplx> g(n1), c(n2), d(n2);
    for (std::size_t j = 0; j < n1; ++j) g[j] = tk.x[j];
    for (std::size_t a = 0; a < n2; ++a) c[a] = tk.x[n1 + a];
    {
        BetheState<double> seed;
        seed.M = spec.M;
        for (auto v : g) seed.roots.push_back(v);
        for (std::size_t a = 0; a < n2; ++a) {
            seed.roots.push_back(c[a] + 0.5 * i);
            seed.roots.push_back(c[a] - 0.5 * i);
        }
        for (std::size_t a = 0; a < n2; ++a) {
            const std::size_t kp = n1 + 2 * a;
            cplx pp = vacuum_ratio_power(seed.roots[kp], spec.M);
            for (std::size_t k = 0; k < seed.roots.size(); ++k)
                if (k != kp && k != kp + 1) pp *= (seed.roots[kp] - seed.roots[k] + i) / (seed.roots[kp] - seed.roots[k] - i);
            d[a] = pp / (1.0 - pp);
            if (!std::isfinite(std::abs(d[a])) || std::abs(d[a]) == 0.0) d[a] = 1e-3;
        }
    }

    auto need_extended = [&](const std::vector<cplx>& dd) {
        return std::any_of(dd.begin(), dd.end(), [](cplx v) { return std::abs(v) < 1e-13; });
    };

    bool use_ext = opt.extended_fallback && need_extended(d);
    if (!use_ext) {
        auto r = solve_pairs_full<double>(spec.M, g, c, d, 1e-14, opt.max_iter);
        std::vector<cplx> dd;
        for (const auto& pr : r.state.pairs) dd.push_back(pr.delta);
        if (need_extended(dd)) {
            if (!opt.extended_fallback) throw Error(ErrorCode::DeviationUnderflow, "deviation below 1e-13");
            use_ext = true;
        } else {
            st = std::move(r.state);
        }
    }
    if (use_ext) {
        std::vector<ext_complex> ge, ce, de;
        for (auto v : g) ge.push_back(from_double<ext_real>(v));
        for (auto v : c) ce.push_back(from_double<ext_real>(v));
        for (auto v : d) de.push_back(from_double<ext_real>(v));
        auto r = solve_pairs_full<ext_real>(spec.M, ge, ce, de, 1e-40, opt.max_iter);
        mark_on_shell(r.state);
        st = convert_state<double>(r.state);
        out.extended_used = true;
    }
    st.tolerance = opt.on_shell_tol;
    mark_on_shell(st);
    if (!st.on_shell) throw Error(ErrorCode::NonConvergence, "close-pair Newton residual " + std::to_string(st.max_residual));
    out.state = std::move(st);
    out.classification = classify(out.state);
    return out;
}

// ------------------------------------------------------ higher level

struct HigherLevelSolutions {
    std::vector<std::vector<cplx>> branches;
    std::vector<double> residuals;
    std::vector<std::vector<cplx>> seeds;
};

/// Residuals 1 − ∏_b e(μ_a − θ_b) ∏_{b≠a} (μ_a−μ_b+i)/(μ_a−μ_b−i), i.e. ã(μ_a) + 1 up to a factor.
inline std::vector<cplx> higher_level_residuals(const std::vector<double>& holes, const std::vector<cplx>& mu) {
    const cplx i(0.0, 1.0);
    std::vector<cplx> out;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        cplx p = 1.0;
        for (double th : holes) p *= (mu[a] - th - 0.5 * i) / (mu[a] - th + 0.5 * i);
        for (std::size_t b = 0; b < mu.size(); ++b)
            if (b != a) p *= (mu[a] - mu[b] + i) / (mu[a] - mu[b] - i);
        out.push_back(1.0 - p);
    }
    return out;
}

/// ã(λ) = ∏_b (λ−θ_b−i/2)/(λ−θ_b+i/2) · ∏_b (λ−μ_b+i)/(λ−μ_b−i).
inline cplx higher_level_counting(const std::vector<double>& holes, const std::vector<cplx>& mu, cplx lambda) {
    const cplx i(0.0, 1.0);
    cplx p = 1.0;
    for (double th : holes) p *= (lambda - th - 0.5 * i) / (lambda - th + 0.5 * i);
    for (const auto& m : mu) p *= (lambda - m + i) / (lambda - m - i);
    return p;
}

/// ã'(μ_a) at a solution, using ã(μ_a) = −1.
inline cplx higher_level_counting_derivative(const std::vector<double>& holes, const std::vector<cplx>& mu, std::size_t a) {
    const cplx i(0.0, 1.0);
    cplx s = 0.0;
    for (double th : holes) s += 1.0 / (mu[a] - th - 0.5 * i) - 1.0 / (mu[a] - th + 0.5 * i);
    for (std::size_t b = 0; b < mu.size(); ++b)
        s += 1.0 / (mu[a] - mu[b] + i) - 1.0 / (mu[a] - mu[b] - i);
    return -s;
}

namespace detail {

inline std::optional<std::vector<cplx>> higher_level_newton(const std::vector<double>& holes, std::vector<cplx> mu,
                                                             double tol) {
    const std::size_t n = mu.size();
    const cplx i(0.0, 1.0);
    auto norm = [](const std::vector<cplx>& v) {
        double m = 0;
        for (auto z : v) m = std::max(m, std::abs(z));
        return m;
    };
    auto F = higher_level_residuals(holes, mu);
    double fn = norm(F);
    for (int it = 0; it < 200 && fn > tol; ++it) {
        ComplexMatrix J = ComplexMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        ComplexVector Fv(static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a) {
            const cplx p = 1.0 - F[a];
            cplx da = 0.0;
            for (double th : holes) da += 1.0 / (mu[a] - th - 0.5 * i) - 1.0 / (mu[a] - th + 0.5 * i);
            for (std::size_t b = 0; b < n; ++b) {
                if (b == a) continue;
                const cplx g = 1.0 / (mu[a] - mu[b] + i) - 1.0 / (mu[a] - mu[b] - i);
                da += g;
                J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = p * g;  // d(1−p)/dμ_b = +p·g
            }
            J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = -p * da;
            Fv(static_cast<Eigen::Index>(a)) = F[a];
        }
        const ComplexVector step = J.partialPivLu().solve(Fv);
        double lam = 1.0;
        bool ok = false;
        for (int h = 0; h <= 20; ++h, lam *= 0.5) {
            std::vector<cplx> y(n);
            for (std::size_t a = 0; a < n; ++a) y[a] = mu[a] - lam * step(static_cast<Eigen::Index>(a));
            auto Fy = higher_level_residuals(holes, y);
            const double fy = norm(Fy);
            if (std::isfinite(fy) && fy < fn) {
                mu = y;
                F = Fy;
                fn = fy;
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }
    if (!(fn <= tol)) return std::nullopt;
    return mu;
}

inline std::vector<cplx> canonical(std::vector<cplx> v) {
    std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
        if (std::abs(a.real() - b.real()) > 1e-9) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return v;
}

inline bool self_conjugate(const std::vector<cplx>& v, double tol) {
    for (const auto& z : v) {
        const bool found = std::any_of(v.begin(), v.end(), [&](cplx w) { return std::abs(w - std::conj(z)) < tol; });
        if (!found) return false;
    }
    return true;
}

}  // namespace detail

/// Solves ã(μ̃_a) + 1 = 0. Real branches come from all admissible quantum
/// number sets of the logarithmic form; further seeds sit at hole midpoints
/// (and ±i/2 off them). Every distinct self-conjugate solution is returned.
inline HigherLevelSolutions solve_higher_level(std::vector<double> holes, int n_tilde, double tol = 1e-12) {
    HigherLevelSolutions out;
    if (n_tilde == 0) {
        out.branches.push_back({});
        out.residuals.push_back(0.0);
        return out;
    }
    std::sort(holes.begin(), holes.end());
    for (std::size_t a = 0; a + 1 < holes.size(); ++a)
        if (std::abs(holes[a + 1] - holes[a]) < 1e-12) throw Error(ErrorCode::CoincidingHoles, "coinciding holes");
    const int nh = int(holes.size());

    auto add = [&](std::vector<cplx> mu) {
        mu = detail::canonical(std::move(mu));
        if (!detail::self_conjugate(mu, 1e-8)) return;
        for (std::size_t a = 0; a < mu.size(); ++a)
            for (std::size_t b = a + 1; b < mu.size(); ++b)
                if (std::abs(mu[a] - mu[b]) < 1e-8) return;
        for (const auto& br : out.branches) {
            double d = 0;
            for (std::size_t k = 0; k < mu.size(); ++k) d = std::max(d, std::abs(br[k] - mu[k]));
            if (d < 1e-8) return;
        }
        out.branches.push_back(mu);
        out.residuals.push_back(max_abs<double>(higher_level_residuals(holes, mu)));
    };

    // Real branches via the logarithmic form Σ_b θ_1(μ−θ_b) − Σ θ_2(μ_a−μ_b) = 2π J_a.
    {
        const double Jmax = 0.5 * (nh - 1 - n_tilde);
        const bool integer = (nh - n_tilde) % 2 != 0;
        std::vector<double> ladder;
        if (Jmax >= 0)
            for (double J = integer ? -std::floor(Jmax) : -Jmax; J <= Jmax + 1e-9; J += 1.0) ladder.push_back(J);
        std::vector<int> pick(ladder.size(), 0);
        if (int(ladder.size()) >= n_tilde) {
            std::fill(pick.end() - n_tilde, pick.end(), 1);
            do {
                std::vector<double> Js;
                for (std::size_t k = 0; k < ladder.size(); ++k)
                    if (pick[k]) Js.push_back(ladder[k]);
                // Newton on the real logarithmic form with the holes as inhomogeneities.
                std::vector<double> x(Js.size());
                for (std::size_t a = 0; a < Js.size(); ++a) x[a] = density_guess(Js[a], Jmax + 0.5);
                for (int it = 0; it < 200; ++it) {
                    const std::size_t n = x.size();
                    Eigen::VectorXd F(static_cast<Eigen::Index>(n));
                    Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
                    for (std::size_t a = 0; a < n; ++a) {
                        double f = -2.0 * M_PI * Js[a], d = 0.0;
                        for (double th : holes) {
                            f += theta_n(x[a] - th, 1);
                            d += dtheta_n(x[a] - th, 1);
                        }
                        for (std::size_t b = 0; b < n; ++b) {
                            if (b == a) continue;
                            f -= theta_n(x[a] - x[b], 2);
                            const double k = dtheta_n(x[a] - x[b], 2);
                            d -= k;
                            Jm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = k;
                        }
                        Jm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = d;
                        F(static_cast<Eigen::Index>(a)) = f;
                    }
                    if (F.cwiseAbs().maxCoeff() < 1e-15) break;
                    Eigen::VectorXd s = Jm.partialPivLu().solve(F);
                    const double smax = s.cwiseAbs().maxCoeff();
                    if (smax > 0.5) s *= 0.5 / smax;
                    for (std::size_t a = 0; a < n; ++a) x[a] -= s(static_cast<Eigen::Index>(a));
                }
                std::vector<cplx> mu(x.begin(), x.end());
                out.seeds.push_back(mu);
                if (auto r = detail::higher_level_newton(holes, mu, tol)) add(*r);
            } while (std::next_permutation(pick.begin(), pick.end()));
        }
    }

    // Complex seeds from hole midpoints.
    std::vector<double> mids;
    for (std::size_t a = 0; a + 1 < holes.size(); ++a) mids.push_back(0.5 * (holes[a] + holes[a + 1]));
    if (int(mids.size()) >= n_tilde) {
        std::vector<int> pick(mids.size(), 0);
        std::fill(pick.end() - n_tilde, pick.end(), 1);
        do {
            std::vector<cplx> base;
            for (std::size_t k = 0; k < mids.size(); ++k)
                if (pick[k]) base.emplace_back(mids[k], 0.0);
            for (double shift : {0.0, 0.3, 0.7}) {
                std::vector<cplx> mu = base;
                if (shift > 0 && mu.size() >= 2) {
                    mu[0] += cplx(0, shift);
                    mu[1] = std::conj(mu[0]);
                }
                out.seeds.push_back(mu);
                if (auto r = detail::higher_level_newton(holes, mu, tol)) add(*r);
            }
        } while (std::next_permutation(pick.begin(), pick.end()));
    }
    if (out.branches.empty()) throw Error(ErrorCode::NonConvergence, "no higher-level solution from any seed");
    return out;
}

}  // namespace bethexx
