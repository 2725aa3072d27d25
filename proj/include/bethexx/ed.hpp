#pragma once

#include "core.hpp"
#include "errors.hpp"
#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <bit>
#include <cstdint>
#include <memory>
#include <vector>

namespace bethexx::ed {

// Bit m of a configuration is 1 when site m carries a down spin.

inline constexpr int kMaxThreadingSites = 16;
inline constexpr int kMaxDenseSites = 14;

struct SectorBasis {
    int M = 0;
    int n_down = 0;
    std::vector<std::uint32_t> basis;  // ascending
    std::vector<std::int32_t> index;   // full configuration -> position, −1 outside

    std::size_t dimension() const { return basis.size(); }
};

inline std::shared_ptr<const SectorBasis> make_sector(int M, int n_down) {
    if (M < 1 || M > kMaxThreadingSites) throw Error(ErrorCode::SizeLimitExceeded, "M out of range for ED");
    if (n_down < 0 || n_down > M) throw Error(ErrorCode::InvalidArgument, "n_down out of range");
    auto s = std::make_shared<SectorBasis>();
    s->M = M;
    s->n_down = n_down;
    s->index.assign(std::size_t(1) << M, -1);
    for (std::uint32_t x = 0; x < (std::uint32_t(1) << M); ++x)
        if (std::popcount(x) == n_down) {
            s->index[x] = static_cast<std::int32_t>(s->basis.size());
            s->basis.push_back(x);
        }
    return s;
}

struct StateVector {
    std::shared_ptr<const SectorBasis> sector;
    ComplexVector amplitudes;
};

/// Full-space vectors have length 2^M; sector vectors only the sector entries.
inline ComplexVector to_full(const StateVector& v) {
    ComplexVector f = ComplexVector::Zero(static_cast<Eigen::Index>(1) << v.sector->M);
    for (std::size_t i = 0; i < v.sector->dimension(); ++i) f(v.sector->basis[i]) = v.amplitudes(static_cast<Eigen::Index>(i));
    return f;
}

inline StateVector from_full(const ComplexVector& f, std::shared_ptr<const SectorBasis> sector) {
    StateVector v{sector, ComplexVector(static_cast<Eigen::Index>(sector->dimension()))};
    for (std::size_t i = 0; i < sector->dimension(); ++i) v.amplitudes(static_cast<Eigen::Index>(i)) = f(sector->basis[i]);
    return v;
}

inline int sites_of(const ComplexVector& f) {
    const auto n = static_cast<std::uint64_t>(f.size());
    if (n == 0 || (n & (n - 1)) != 0) throw Error(ErrorCode::InvalidArgument, "full vector length is not 2^M");
    return std::countr_zero(n);
}

inline ComplexVector vacuum(int M) {
    ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(1) << M);
    v(0) = 1.0;
    return v;
}

// ------------------------------------------------------------ Hamiltonian

/// H = Σ_m (σ_m·σ_{m+1} − 1), periodic, restricted to one S^z sector.
inline Eigen::SparseMatrix<double> hamiltonian(const SectorBasis& s) {
    if (s.M < 2 || s.M > kMaxDenseSites || s.M % 2 != 0)
        throw Error(ErrorCode::SizeLimitExceeded, "hamiltonian needs even 2 <= M <= 14");
    std::vector<Eigen::Triplet<double>> trip;
    const int M = s.M;
    for (std::size_t i = 0; i < s.dimension(); ++i) {
        const std::uint32_t b = s.basis[i];
        double diag = 0.0;
        for (int m = 0; m < M; ++m) {
            const int n = (m + 1) % M;
            if (((b >> m) & 1u) != ((b >> n) & 1u)) {
                diag -= 2.0;
                const std::uint32_t f = b ^ ((1u << m) | (1u << n));
                trip.emplace_back(s.index[f], int(i), 2.0);
            }
        }
        trip.emplace_back(int(i), int(i), diag);
    }
    Eigen::SparseMatrix<double> H(static_cast<Eigen::Index>(s.dimension()), static_cast<Eigen::Index>(s.dimension()));
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
}

/// H applied to a full-space vector; usable up to the threading limit.
inline ComplexVector apply_hamiltonian(const ComplexVector& v) {
    const int M = sites_of(v);
    ComplexVector out = ComplexVector::Zero(v.size());
    for (std::uint32_t b = 0; b < std::uint32_t(v.size()); ++b) {
        if (v(b) == cplx(0.0)) continue;
        for (int m = 0; m < M; ++m) {
            const int n = (m + 1) % M;
            if (((b >> m) & 1u) != ((b >> n) & 1u)) {
                out(b) -= 2.0 * v(b);
                out(b ^ ((1u << m) | (1u << n))) += 2.0 * v(b);
            }
        }
    }
    return out;
}

struct SectorSpectrum {
    std::shared_ptr<const SectorBasis> sector;
    Eigen::VectorXd energies;
    Eigen::MatrixXd vectors;
};

inline SectorSpectrum diagonalize(int M, int n_down) {
    auto s = make_sector(M, n_down);
    Eigen::MatrixXd H = Eigen::MatrixXd(hamiltonian(*s));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    return {s, es.eigenvalues(), es.eigenvectors()};
}

// -------------------------------------------------------------- monodromy

enum class Entry { A, B, C, D };

/// One R_{0m}(u) = (u + iP_{0m})/(u + i) on the pair (auxiliary up part, auxiliary down part).
inline void apply_R(cplx u, int m, ComplexVector& va, ComplexVector& vd) {
    const std::uint32_t bit = 1u << m;
    const cplx i(0.0, 1.0);
    const cplx norm = 1.0 / (u + i);
    for (std::uint32_t x = 0; x < std::uint32_t(va.size()); ++x) {
        if (x & bit) continue;
        const std::uint32_t y = x | bit;
        // (aux, site) amplitudes: (↑,↑)=va[x] (↑,↓)=va[y] (↓,↑)=vd[x] (↓,↓)=vd[y].
        const cplx uu = va(x), ud = va(y), du = vd(x), dd = vd(y);
        va(x) = (u + i) * uu * norm;
        vd(y) = (u + i) * dd * norm;
        va(y) = (u * ud + i * du) * norm;
        vd(x) = (u * du + i * ud) * norm;
    }
}

/// Entry of T(λ) = R_{0M}(λ−i/2)…R_{01}(λ−i/2) applied to a full-space vector.
/// B = ⟨↑|T|↓⟩ raises the number of down spins by one. `reversed` threads
/// the sites in the opposite order, which yields the transpose of the dual.
inline ComplexVector apply_monodromy_entry(Entry e, cplx lambda, const ComplexVector& v, bool reversed = false) {
    const int M = sites_of(v);
    if (M > kMaxThreadingSites) throw Error(ErrorCode::SizeLimitExceeded, "monodromy threading limited to M <= 16");
    const cplx u = lambda - cplx(0.0, 0.5);
    if (std::abs(u + cplx(0.0, 1.0)) < 1e-300) throw Error(ErrorCode::PoleAtArgument, "R pole at lambda = -i/2");
    const bool in_up = (e == Entry::A || e == Entry::C);
    const bool out_up = (e == Entry::A || e == Entry::B);
    ComplexVector va = in_up ? v : ComplexVector::Zero(v.size());
    ComplexVector vd = in_up ? ComplexVector::Zero(v.size()) : v;
    for (int k = 0; k < M; ++k) apply_R(u, reversed ? M - 1 - k : k, va, vd);
    return out_up ? va : vd;
}

template <class Roots>
ComplexVector bethe_vector_full(const Roots& roots, int M, bool reversed = false) {
    ComplexVector v = vacuum(M);
    for (const auto& r : roots) v = apply_monodromy_entry(Entry::B, to_double(r), v, reversed);
    return v;
}

/// B(λ_1)…B(λ_N)|0⟩ in the n_down = N sector.
template <class Real>
StateVector build_bethe_vector(const BetheState<Real>& st) {
    if (2 * st.N() > st.M) throw Error(ErrorCode::InvalidArgument, "N exceeds M/2");
    return from_full(bethe_vector_full(st.roots, st.M), make_sector(st.M, st.N()));
}

/// Vector w with ⟨0|C(λ_1)…C(λ_N)|x⟩ = wᵀx for every x.
template <class Roots>
ComplexVector dual_vector_full(const Roots& roots, int M) {
    return bethe_vector_full(roots, M, true);
}

/// Bilinear pairing ⟨0|C…C · B…B|0⟩ as used by all determinant formulas.
inline cplx bilinear(const ComplexVector& dual, const ComplexVector& v) { return (dual.transpose() * v)(0); }

// -------------------------------------------------------------- spin ops

/// Total S⁺ = Σ σ⁺_m (flips a down spin up).
inline ComplexVector total_splus(const ComplexVector& v) {
    const int M = sites_of(v);
    ComplexVector out = ComplexVector::Zero(v.size());
    for (std::uint32_t x = 0; x < std::uint32_t(v.size()); ++x)
        for (int m = 0; m < M; ++m)
            if (x & (1u << m)) out(x ^ (1u << m)) += v(x);
    return out;
}

/// Total S⁻ = Σ σ⁻_m (flips an up spin down).
inline ComplexVector total_sminus(const ComplexVector& v) {
    const int M = sites_of(v);
    ComplexVector out = ComplexVector::Zero(v.size());
    for (std::uint32_t x = 0; x < std::uint32_t(v.size()); ++x)
        for (int m = 0; m < M; ++m)
            if (!(x & (1u << m))) out(x | (1u << m)) += v(x);
    return out;
}

enum class SpinOp { z, plus, minus };

inline ComplexVector apply_site_op(SpinOp op, int site, const ComplexVector& v) {
    const int M = sites_of(v);
    if (site < 1 || site > M) throw Error(ErrorCode::InvalidArgument, "site out of range");
    const std::uint32_t bit = 1u << (site - 1);
    ComplexVector out = ComplexVector::Zero(v.size());
    for (std::uint32_t x = 0; x < std::uint32_t(v.size()); ++x) {
        const bool down = x & bit;
        switch (op) {
            case SpinOp::z: out(x) = down ? -v(x) : v(x); break;
            case SpinOp::plus: if (down) out(x ^ bit) += v(x); break;
            case SpinOp::minus: if (!down) out(x | bit) += v(x); break;
        }
    }
    return out;
}

/// Cyclic translation by one site: site m → m+1.
inline ComplexVector shift(const ComplexVector& v) {
    const int M = sites_of(v);
    const std::uint32_t mask = (1u << M) - 1u;
    ComplexVector out(v.size());
    for (std::uint32_t x = 0; x < std::uint32_t(v.size()); ++x) {
        const std::uint32_t y = ((x << 1) | (x >> (M - 1))) & mask;
        out(y) = v(x);
    }
    return out;
}

/// ⟨Ψ_g|σ^a_site|Ψ_e⟩ / √(⟨Ψ_g|Ψ_g⟩⟨Ψ_e|Ψ_e⟩), Hermitian.
inline cplx direct_form_factor(const StateVector& g, const StateVector& e, int site, SpinOp op) {
    const int dn = g.sector->n_down - e.sector->n_down;
    const int need = op == SpinOp::z ? 0 : (op == SpinOp::plus ? -1 : 1);
    if (g.sector->M != e.sector->M || dn != need)
        throw Error(ErrorCode::SectorMismatch, "operator cannot connect the two sectors");
    const ComplexVector ge = to_full(g), ee = to_full(e);
    const ComplexVector oe = apply_site_op(op, site, ee);
    const cplx num = ge.dot(oe);
    return num / std::sqrt(ge.squaredNorm() * ee.squaredNorm());
}

/// Same contraction on full-space vectors.
inline cplx direct_form_factor_full(const ComplexVector& g, const ComplexVector& e, int site, SpinOp op) {
    const ComplexVector oe = apply_site_op(op, site, e);
    return g.dot(oe) / std::sqrt(g.squaredNorm() * e.squaredNorm());
}

/// Rayleigh quotient and relative eigen-residual ‖Hv − Ev‖/‖v‖.
struct EigenCheck {
    double energy = 0.0;
    double residual = 0.0;
};

inline EigenCheck eigen_check(const ComplexVector& v) {
    const ComplexVector Hv = apply_hamiltonian(v);
    const double n2 = v.squaredNorm();
    const cplx E = v.dot(Hv) / n2;
    return {E.real(), (Hv - E * v).norm() / std::sqrt(n2)};
}

/// e^{iP} from ⟨v|U|v⟩/⟨v|v⟩ with U the one-site translation.
inline cplx translation_eigenvalue(const ComplexVector& v) { return v.dot(shift(v)) / v.squaredNorm(); }

/// ED eigenvector with maximal overlap to v, and the squared overlap of v
/// with the whole degenerate eigenspace of that level.
inline std::pair<Eigen::Index, double> best_overlap(const SectorSpectrum& sp, const StateVector& v,
                                                    double degeneracy_tol = 1e-8) {
    const double nv = v.amplitudes.norm();
    Eigen::Index best = -1;
    double bo = -1.0;
    std::vector<double> ov(std::size_t(sp.vectors.cols()));
    for (Eigen::Index k = 0; k < sp.vectors.cols(); ++k) {
        ov[std::size_t(k)] = std::abs(sp.vectors.col(k).cast<cplx>().dot(v.amplitudes)) / nv;
        if (ov[std::size_t(k)] > bo) {
            bo = ov[std::size_t(k)];
            best = k;
        }
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < sp.vectors.cols(); ++k)
        if (std::abs(sp.energies(k) - sp.energies(best)) < degeneracy_tol) sum += ov[std::size_t(k)] * ov[std::size_t(k)];
    return {best, sum};
}

}  // namespace bethexx::ed
