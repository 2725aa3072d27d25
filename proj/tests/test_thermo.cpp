#include <bethexx/thermo.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace bethexx;

namespace {

const cplx I(0.0, 1.0);

struct PureHole {
    BetheState<double> ground;
    ExcitationResult excited;
};

PureHole pure_hole(int M) { return {solve_ground_state(M), solve_hole_excitation({M, {M / 8, 3 * M / 8}})}; }

ExcitationResult close_pair_state(int M) {
    const auto ladder = vacancy_ladder(M, 1, (M - 6) / 2, 1);
    const int n = static_cast<int>(ladder.size());
    ExcitationSpec s;
    s.M = M;
    s.holes = {int(n * 0.1), int(n * 0.35), int(n * 0.6), int(n * 0.85)};
    s.n2s = 1;
    s.string_slots = {1};
    return solve_close_pair_state(s);
}

double det_deviation(const ComplexMatrix& closed, const ComplexMatrix& direct) {
    return std::abs((log_det(closed) / log_det(direct)).value() - 1.0);
}

}  // namespace

// ------------------------------------------------------------ densities

TEST(Density, BranchesSolveTheIntegralEquation) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> re(-2.0, 2.0);
    struct Range {
        double a, lo, hi;
    };
    for (const Range r : {Range{0.5, -0.45, 0.45}, Range{0.5, 0.6, 1.4}, Range{0.5, -1.4, -0.6}, Range{1.0, -0.9, 0.9},
                          Range{1.0, 1.1, 1.8}, Range{1.0, -1.8, -1.1}}) {
        std::uniform_real_distribution<double> im(r.lo, r.hi);
        double worst = 0.0;
        for (int k = 0; k < 25; ++k) worst = std::max(worst, lieb_residual(r.a, re(rng), cplx(re(rng), im(rng))));
        EXPECT_LT(worst, 1e-8) << "a=" << r.a << " Im mu in [" << r.lo << "," << r.hi << "]";
    }
}

TEST(Density, UnsymmetrizedFormMissesTheEquation) {
    const double r = lieb_residual([](cplx l, cplx m) { return detail::rho_one_inside_unsymmetrized(l, m); }, 1.0, 0.3,
                                   cplx(0.2, 0.1));
    EXPECT_GT(r, 1e-3);
}

TEST(Density, OutsideRhoOneIsShiftedKernel) {
    const cplx mu(0.4, 1.3), l(-0.7, 0.0);
    EXPECT_LT(std::abs(density(1.0, l, mu) - kernel_K(l - mu + 0.5 * I, 0.5)), 1e-15);
}

TEST(Density, BranchLineRejected) {
    EXPECT_THROW(density(0.5, 0.0, cplx(0.1, 0.5)), Error);
    EXPECT_THROW(density(1.0, 0.0, cplx(0.1, -1.0)), Error);
    EXPECT_THROW(density(0.75, 0.0, cplx(0.1, 0.2)), Error);
}

TEST(Density, HalfAtOrigin) { EXPECT_NEAR(std::abs(density(0.5, 0.0, 0.0) - 0.5), 0.0, 1e-15); }

TEST(Density, HoleDensity) {
    for (double x : {0.1, 0.7, 1.9}) EXPECT_NEAR(hole_density(x), hole_density(-x), 1e-15);
    // Tail 1/(4πλ²); the digamma combination cancels badly there.
    for (double x : {1e3, 1e8, 1e12}) EXPECT_NEAR(hole_density(x) * x * x * 4.0 * M_PI, 1.0, 1e-6);
    EXPECT_NEAR(hole_density(29.0 * 2.0) / hole_density(31.0 * 2.0), 31.0 * 31.0 / (29.0 * 29.0), 1e-3);
    const cplx total = integrate_line([](cplx x) { return rho_h(x); }, 0.0);
    EXPECT_NEAR(total.real(), 0.5, 1e-10);
    EXPECT_LT(lieb_residual([](cplx l, cplx) { return rho_h(l); }, 1.0, 0.35, 0.0), 1e-10);
}

TEST(Factorization, ClosePairSplitsIntoHalfKernel) {
    const auto f = close_pair_factorization(1.0, 0.0);
    EXPECT_LT(f.mismatch(), 1e-12);
    EXPECT_NEAR(f.value().real(), kernel_K(1.0, 0.5).real(), 1e-15);
    EXPECT_LT(std::abs(close_pair_factorization(8.0, 0.0).value()), std::abs(f.value()));
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> re(-2.0, 2.0), im(-0.4, 0.4);
    for (int k = 0; k < 50; ++k) EXPECT_LT(close_pair_factorization(re(rng), cplx(re(rng), im(rng))).mismatch(), 1e-10);
    EXPECT_THROW(close_pair_factorization(0.0, cplx(0.0, 0.6)), Error);
}

// ------------------------------------------------------------ convolutions

TEST(Convolution, AllIdentitiesHold) {
    const auto rep = convolution_table_check(1, 10, {}, 4);
    ASSERT_EQ(rep.rows.size(), 15u);
    int zeros = 0;
    for (const auto& r : rep.rows) {
        EXPECT_LT(r.max_error, 1e-8) << r.name;
        zeros += r.exact_zero;
    }
    EXPECT_EQ(zeros, 2);
    EXPECT_LT(rep.max_error(), 1e-8);
}

TEST(Convolution, ThreadedMatchesSerial) {
    const auto a = convolution_table_check(3, 2, {}, 1), b = convolution_table_check(3, 2, {}, 3);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].name, b.rows[k].name);
        EXPECT_EQ(a.rows[k].max_error, b.rows[k].max_error);
    }
}

TEST(Convolution, ContourOutsideWindowRejected) {
    QuadOptions o;
    o.alpha = 0.35;
    EXPECT_THROW(convolution_table_check(1, 1, o), Error);
}

TEST(Condensation, SumBecomesIntegralPlusResidues) {
    const auto gs = solve_ground_state(256);
    const auto c = condensation_check(gs, cplx(0.2, -0.75), 0.4);
    EXPECT_NE(c.residues, cplx(0.0));
    EXPECT_LT(c.error(), 1e-4);
    EXPECT_LT(condensation_check(gs, cplx(0.3, 0.3), 0.2).error(), 1e-4);
    EXPECT_THROW(condensation_check(gs, cplx(0.0, 0.0), 0.6), Error);
}

// ------------------------------------------------------ higher level

TEST(HigherLevel, SystemIsSolved) {
    const auto sol = solve_higher_level({-1.1, -0.4, 0.4, 1.1}, 1);
    ASSERT_FALSE(sol.branches.empty());
    const auto s = make_higher_level_system({-1.1, -0.4, 0.4, 1.1}, sol.branches[0]);
    EXPECT_LT(s.residual(), 1e-12);
    ASSERT_EQ(s.H.rows(), 1);
    ASSERT_EQ(s.H.cols(), 4);
    // Real μ̃ and mirrored holes: ℋ_{a,b} and ℋ_{a,n−1−b} are conjugate when μ̃ = 0.
    if (std::abs(sol.branches[0][0]) < 1e-12)
        for (int b = 0; b < 4; ++b) EXPECT_NEAR(std::abs(s.H(0, b) - std::conj(s.H(0, 3 - b))), 0.0, 1e-12);
}

TEST(HigherLevel, ClosePairStateSystem) {
    const auto ex = close_pair_state(16);
    const auto hl = higher_level_for(ex.classification);
    ASSERT_EQ(hl.roots.size(), 1u);
    EXPECT_LT(hl.residual(), 1e-12);
    EXPECT_LT(std::abs(hl.roots[0] - ex.classification.higher_roots[0]), 1e-2);
}

// ------------------------------------------------------ perturbed Cauchy matrices

TEST(ClosedForm, WideColumnFormula) {
    const cplx w(0.3, 1.2), l(0.4, 0.0);
    const cplx upper = density(0.5, l, w + I) - density(0.5, l, w);
    const cplx wb = std::conj(w);
    const cplx lower = density(0.5, l, wb) - density(0.5, l, wb - I);
    EXPECT_LT(std::abs(lower + std::conj(upper)), 1e-13);
}

TEST(ClosedForm, PairSinhSumCancels) {
    const cplx c(0.2, 0.0), x(-0.3, 0.0);
    const cplx d(1e-3, 0.0);
    const cplx direct = M_PI / std::sinh(M_PI * (c + I * (0.5 + d) - x)) + M_PI / std::sinh(M_PI * (c - I * (0.5 + d) - x));
    EXPECT_LT(std::abs(detail::pair_sinh_sum(c, d, x) - direct), 1e-12);
    EXPECT_EQ(detail::pair_sinh_sum(c, 0.0, x), cplx(0.0));
}

TEST(ClosedForm, PureHoleDeterminantsApproachExtraction) {
    std::vector<double> dg, de;
    for (int M : {16, 24, 32}) {
        const auto s = pure_hole(M);
        const auto& cls = s.excited.classification;
        const auto hl = higher_level_for(cls);
        dg.push_back(det_deviation(build_F_g(s.ground, s.excited.state, cls), extract_ground(s.ground, s.excited.state)));
        de.push_back(det_deviation(build_F_e(s.excited.state, s.ground, cls, hl), extract_excited(s.excited.state, s.ground)));
    }
    EXPECT_LT(dg[1], dg[0]);
    EXPECT_LT(dg[2], dg[1]);
    EXPECT_LT(de[1], de[0]);
    EXPECT_LT(de[2], de[1]);
    EXPECT_LT(dg[2], 0.05);
    EXPECT_LT(de[2], 0.1);
}

TEST(ClosedForm, ClosePairGroundColumnsMatchExtraction) {
    const int M = 24;
    const auto gs = solve_ground_state(M);
    const auto ex = close_pair_state(M);
    const ComplexMatrix direct = extract_ground(gs, ex.state), closed = build_F_g(gs, ex.state, ex.classification);
    for (Eigen::Index k = 0; k < direct.cols(); ++k)
        EXPECT_LT((direct.col(k) - closed.col(k)).norm() / direct.col(k).norm(), 0.05) << "column " << k;
}

// ------------------------------------------------------ thermodynamic form factor

TEST(ThermoFormFactor, ScalingWithSystemSize) {
    std::vector<double> scaled;
    for (int M : {32, 64, 128}) {
        const auto s = pure_hole(M);
        scaled.push_back(finite_form_factor(s.ground, s.excited.state).value * M * M);
    }
    EXPECT_NEAR(scaled[1] / scaled[0], 1.0, 0.1);
    EXPECT_NEAR(scaled[2] / scaled[1], 1.0, 0.1);
}

TEST(ThermoFormFactor, ApproachesFiniteForPureHoles) {
    std::vector<double> dev;
    for (int M : {16, 32, 64}) {
        const auto s = pure_hole(M);
        const auto fin = finite_form_factor(s.ground, s.excited.state);
        const auto th = thermo_form_factor(s.ground, s.excited.state);
        EXPECT_LT(th.ff.diagnostics.imag_ratio, 1e-8);
        EXPECT_EQ(th.holes.size(), 2u);
        dev.push_back(std::abs(th.ff.value / fin.value - 1.0));
    }
    EXPECT_LT(dev[1], dev[0]);
    EXPECT_LT(dev[2], dev[1]);
    EXPECT_LT(dev[2], 0.05);
}

TEST(ThermoFormFactor, ClosePairStateIsFinite) {
    const auto gs = solve_ground_state(20);
    const auto ex = close_pair_state(20);
    const auto th = thermo_form_factor(gs, ex.state);
    EXPECT_TRUE(std::isfinite(th.ff.log_value.log_abs));
    EXPECT_LT(th.higher_residual, 1e-12);
    EXPECT_EQ(th.holes.size(), 4u);
}

TEST(ThermoFormFactor, SelectionRuleZero) {
    const auto gs = solve_ground_state(8);
    const auto th = thermo_form_factor(gs, gs);
    EXPECT_TRUE(th.ff.diagnostics.selection_rule_zero);
    EXPECT_EQ(th.ff.value, 0.0);
}

TEST(ThermoFormFactor, HolesOutsideBulkFlagged) {
    const auto s = pure_hole(32);
    ThermoOptions o;
    o.bulk_cutoff = 0.1;
    EXPECT_TRUE(thermo_form_factor(s.ground, s.excited.state, o).ff.diagnostics.holes_outside_bulk);
    EXPECT_FALSE(thermo_form_factor(s.ground, s.excited.state).ff.diagnostics.holes_outside_bulk);
}
