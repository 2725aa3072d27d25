#include <bethexx/ed.hpp>
#include <bethexx/solve.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace bethexx;
using namespace bethexx::ed;

namespace {

const cplx I(0.0, 1.0);

ComplexVector random_vector(int M, std::mt19937& rng) {
    std::normal_distribution<double> n;
    ComplexVector v(static_cast<Eigen::Index>(1) << M);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = cplx(n(rng), n(rng));
    return v;
}

}  // namespace

TEST(Sector, DimensionAndOrder) {
    auto s = make_sector(12, 6);
    EXPECT_EQ(s->dimension(), 924u);
    EXPECT_TRUE(std::is_sorted(s->basis.begin(), s->basis.end()));
}

TEST(Hamiltonian, TwoSiteSinglet) {
    auto sp = diagonalize(2, 1);
    EXPECT_NEAR(sp.energies.minCoeff(), -8.0, 1e-12);
}

TEST(Hamiltonian, FerromagnetIsZero) {
    for (int M : {2, 4, 8, 12}) {
        auto sp = diagonalize(M, 0);
        EXPECT_NEAR(sp.energies(0), 0.0, 1e-14);
    }
}

TEST(Hamiltonian, SizeLimit) {
    try {
        hamiltonian(*make_sector(16, 8));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SizeLimitExceeded);
    }
}

TEST(Hamiltonian, GroundEnergyMatchesBetheRoots) {
    auto sp = diagonalize(8, 4);
    const auto gs = solve_ground_state(8);
    EXPECT_NEAR(sp.energies.minCoeff(), bethe_energy(gs), 1e-10);
}

TEST(Monodromy, VacuumRelations) {
    const int M = 6;
    const ComplexVector v0 = vacuum(M);
    for (cplx lam : {cplx(0.3, 0.1), cplx(-1.2, 0.0), cplx(0.0, 2.0)}) {
        EXPECT_LT(apply_monodromy_entry(Entry::C, lam, v0).norm(), 1e-14);
        EXPECT_LT((apply_monodromy_entry(Entry::A, lam, v0) - v0).norm(), 1e-14);
        const cplx d = std::pow((lam - 0.5 * I) / (lam + 0.5 * I), M);
        EXPECT_LT((apply_monodromy_entry(Entry::D, lam, v0) - d * v0).norm(), 1e-13);
    }
}

TEST(Monodromy, BOperatorsCommute) {
    std::mt19937 rng(3);
    const ComplexVector v = random_vector(6, rng);
    const cplx a(0.3, -0.4), b(-0.8, 0.25);
    const ComplexVector ab = apply_monodromy_entry(Entry::B, a, apply_monodromy_entry(Entry::B, b, v));
    const ComplexVector ba = apply_monodromy_entry(Entry::B, b, apply_monodromy_entry(Entry::B, a, v));
    EXPECT_LT((ab - ba).norm(), 1e-12 * ab.norm());
}

TEST(Monodromy, DualIsTransposeOfReversedThreading) {
    // ⟨0|C(λ)x = wᵀx where w is the B-vector threaded in reverse order.
    const int M = 5;
    std::mt19937 rng(5);
    const ComplexVector x = random_vector(M, rng);
    const cplx lam(0.4, 0.2);
    const ComplexVector cx = apply_monodromy_entry(Entry::C, lam, x);
    const ComplexVector w = dual_vector_full(std::vector<cplx>{lam}, M);
    EXPECT_LT(std::abs(cx(0) - bilinear(w, x)), 1e-13 * std::abs(cx(0)));
}

TEST(BetheVector, EmptyIsVacuum) {
    BetheState<double> s;
    s.M = 6;
    auto v = build_bethe_vector(s);
    EXPECT_EQ(v.sector->n_down, 0);
    EXPECT_EQ(v.amplitudes.size(), 1);
    EXPECT_EQ(v.amplitudes(0), cplx(1.0));
}

TEST(BetheVector, OnShellIsEigenvector) {
    const auto gs = solve_ground_state(8);
    const auto v = build_bethe_vector(gs);
    EXPECT_EQ(v.sector->n_down, 4);
    const auto chk = eigen_check(to_full(v));
    EXPECT_LE(chk.residual / std::abs(chk.energy), 1e-9);
    EXPECT_NEAR(chk.energy, bethe_energy(gs), 1e-9);
}

TEST(BetheVector, HighestWeight) {
    for (int M : {6, 8, 10}) {
        const auto gs = solve_ground_state(M);
        const ComplexVector v = bethe_vector_full(gs.roots, M);
        EXPECT_LE(total_splus(v).norm() / v.norm(), 1e-9);
    }
}

TEST(BetheVector, MultipletNorm) {
    // ⟨Ψ₁|Ψ₁⟩ = 2⟨Ψ₀|Ψ₀⟩ for Ψ₁ = S⁻Ψ₀, Ψ₀ a highest-weight state with S = 1.
    ExcitationSpec spec{8, {0, 1}};
    const auto ex = solve_hole_excitation(spec);
    const ComplexVector v0 = bethe_vector_full(ex.state.roots, 8);
    const ComplexVector v1 = total_sminus(v0);
    EXPECT_NEAR(v1.squaredNorm() / v0.squaredNorm(), 2.0, 1e-10);
}

TEST(BetheVector, DistinctStatesOrthogonal) {
    const auto gs = solve_ground_state(8);
    ExcitationSpec spec{8, {1, 3}};
    auto ex = solve_hole_excitation(spec);
    // Put both in the same sector: lower the triplet once.
    const ComplexVector g = bethe_vector_full(gs.roots, 8);
    const ComplexVector e = total_sminus(bethe_vector_full(ex.state.roots, 8));
    EXPECT_LT(std::abs(g.dot(e)) / (g.norm() * e.norm()), 1e-9);
}

TEST(FormFactor, SelectionRule) {
    const auto gs = solve_ground_state(4);
    const auto g = build_bethe_vector(gs);
    try {
        direct_form_factor(g, g, 1, SpinOp::plus);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SectorMismatch);
    }
}

TEST(FormFactor, DiagonalSigmaZIsReal) {
    const auto gs = solve_ground_state(4);
    const auto g = build_bethe_vector(gs);
    const cplx f = direct_form_factor(g, g, 1, SpinOp::z);
    EXPECT_LT(std::abs(f.imag()), 1e-12);
}

TEST(FormFactor, SU2Identity) {
    // ⟨Ψ₁|σ^z|Ψ_g⟩ = −2⟨Ψ₀|σ^+|Ψ_g⟩ with Ψ₁ = S⁻Ψ₀ (unnormalised vectors).
    const auto gs = solve_ground_state(8);
    ExcitationSpec spec{8, {2, 3}};
    const auto ex = solve_hole_excitation(spec);
    const ComplexVector g = bethe_vector_full(gs.roots, 8);
    const ComplexVector p0 = bethe_vector_full(ex.state.roots, 8);
    const ComplexVector p1 = total_sminus(p0);
    const cplx lhs = p1.dot(apply_site_op(SpinOp::z, 1, g));
    const cplx rhs = -2.0 * p0.dot(apply_site_op(SpinOp::plus, 1, g));
    EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::abs(lhs));
}

TEST(Translation, GroundStateMomentum) {
    for (int M : {6, 8}) {
        const auto gs = solve_ground_state(M);
        const ComplexVector v = bethe_vector_full(gs.roots, M);
        const cplx t = translation_eigenvalue(v);
        EXPECT_NEAR(std::abs(t), 1.0, 1e-10);
        EXPECT_LT(std::abs(t - std::exp(I * bethe_momentum(gs))), 1e-9);
    }
}

TEST(Overlap, ExcitationMatchesEDEigenvector) {
    ExcitationSpec spec{8, {0, 1}};
    const auto ex = solve_hole_excitation(spec);
    const auto v = build_bethe_vector(ex.state);
    const auto sp = diagonalize(8, ex.state.N());
    const auto [k, ov] = best_overlap(sp, v);
    EXPECT_GE(ov, 1.0 - 1e-8);
    EXPECT_NEAR(sp.energies(k), bethe_energy(ex.state), 1e-9);
}
