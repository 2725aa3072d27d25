#include <bethexx/core.hpp>
#include <bethexx/solve.hpp>

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>

using namespace bethexx;

namespace {

const cplx I(0.0, 1.0);

BetheState<double> state_of(int M, std::vector<cplx> roots) {
    BetheState<double> s;
    s.M = M;
    s.roots = std::move(roots);
    return s;
}

}  // namespace

TEST(BaxterQ, EmptyProductIsOne) {
    auto s = state_of(4, {});
    EXPECT_EQ(baxter_q(s, cplx(0.3, -1.2)), cplx(1.0));
}

TEST(BaxterQ, TwoRealRoots) {
    auto s = state_of(4, {0.5, -0.5});
    EXPECT_NEAR(std::abs(baxter_q(s, cplx(0.0)) - cplx(-0.25)), 0.0, 1e-15);
}

TEST(BaxterQ, GroundStateAgainstExtendedProduct) {
    const auto gs = solve_ground_state(8);
    const cplx v = baxter_q(gs, I);
    ext_complex ref(ext_real(1));
    for (const auto& r : gs.roots) ref *= (ext_complex(ext_real(0), ext_real(1)) - from_double<ext_real>(r));
    EXPECT_LT(std::abs(v - to_double(ref)) / std::abs(to_double(ref)), 1e-14);
}

TEST(BaxterQ, ConjugateSymmetricRootSet) {
    auto s = state_of(12, {0.3, -0.7, cplx(0.2, 0.51), cplx(0.2, -0.51)});
    std::mt19937 rng(7);
    std::normal_distribution<double> n;
    for (int k = 0; k < 20; ++k) {
        const cplx z(n(rng), n(rng));
        EXPECT_LT(std::abs(baxter_q(s, std::conj(z)) - std::conj(baxter_q(s, z))), 1e-12 * std::abs(baxter_q(s, z)));
    }
}

TEST(CountingFn, VanishesAtHalfI) {
    const auto gs = solve_ground_state(8);
    EXPECT_LT(std::abs(counting_fn(gs, cplx(0.0, 0.5))), 1e-14);
}

TEST(CountingFn, TwoSiteRoot) {
    // ((λ−i/2)/(λ+i/2))² = −1 with a single root: λ = 0.
    auto s = state_of(2, {0.0});
    EXPECT_LT(std::abs(counting_fn(s, cplx(0.0)) + 1.0), 1e-14);
    // The candidate λ = 1/2 gives 𝔞 = +1 and is not a root.
    auto t = state_of(2, {0.5});
    EXPECT_LT(std::abs(counting_fn(t, cplx(0.5)) - 1.0), 1e-14);
}

TEST(CountingFn, WidePairRegionLimitIsOne) {
    // Thermodynamic statement: log e(λ) + ∫ρ_g(ν) log((λ−ν+i)/(λ−ν−i)) dν = 0 for |Im λ| > 1.
    using boost::math::quadrature::gauss_kronrod;
    for (cplx lam : {cplx(0.7, 1.3), cplx(0.0, 2.0), cplx(-3.0, 1.5)}) {
        auto re = [&](double nu) {
            return (std::log((lam - nu + I) / (lam - nu - I)) / (2.0 * std::cosh(M_PI * nu))).real();
        };
        auto im = [&](double nu) {
            return (std::log((lam - nu + I) / (lam - nu - I)) / (2.0 * std::cosh(M_PI * nu))).imag();
        };
        const double inf = std::numeric_limits<double>::infinity();
        const cplx integral(gauss_kronrod<double, 61>::integrate(re, -inf, inf, 15, 1e-14),
                            gauss_kronrod<double, 61>::integrate(im, -inf, inf, 15, 1e-14));
        const cplx a = std::exp(std::log((lam - 0.5 * I) / (lam + 0.5 * I)) + integral);
        EXPECT_LT(std::abs(a - 1.0), 1e-10) << lam;
    }
}

TEST(CountingFn, WidePairRegionFiniteSizeDecay) {
    // Above the wide-pair line the deviation from 1 decays slowly with M.
    std::vector<double> dev;
    for (int M : {64, 256, 1024}) {
        const auto gs = solve_ground_state(M);
        double m = 0.0;
        for (cplx lam : {cplx(0.7, 1.3), cplx(0.0, 2.0), cplx(0.0, 1.3), cplx(0.0, 1.1)})
            m = std::max(m, std::abs(counting_fn(gs, lam) - 1.0));
        dev.push_back(m);
    }
    EXPECT_LT(dev[1], dev[0]);
    EXPECT_LT(dev[2], dev[1]);
    EXPECT_LT(dev[2], 0.05);
}

TEST(CountingFn, NoUnderflowAtLargeM) {
    const auto gs = solve_ground_state(1024);
    const cplx a = counting_fn(gs, cplx(0.0, 1.3));
    EXPECT_TRUE(std::isfinite(std::abs(a)));
    EXPECT_GT(std::abs(a), 0.5);
}

TEST(CountingFn, PoleIsReported) {
    auto s = state_of(6, {0.3, -0.3});
    try {
        counting_fn(s, cplx(0.3, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PoleAtArgument);
    }
}

TEST(BetheResiduals, TwoSiteClosedForm) {
    auto s = state_of(2, {0.0});
    EXPECT_LT(max_abs<double>(bethe_residuals(s)), 1e-14);
}

TEST(BetheResiduals, OffShellMatchesDirectProduct) {
    auto s = state_of(10, {0.31, -0.2, cplx(0.1, 0.4), 1.7});
    const auto r = bethe_residuals(s);
    for (std::size_t j = 0; j < s.roots.size(); ++j) {
        // direct: 𝔞(λ_j) with the k = j factor dropped from both q's, then 𝔞 + 1 = 1 − (self-skipping product)
        cplx p = std::pow((s.roots[j] - 0.5 * I) / (s.roots[j] + 0.5 * I), 10);
        for (std::size_t k = 0; k < s.roots.size(); ++k)
            if (k != j) p *= (s.roots[j] - s.roots[k] + I) / (s.roots[j] - s.roots[k] - I);
        EXPECT_LT(std::abs(r[j] - (1.0 - p)), 1e-12);
    }
}

TEST(BetheResiduals, GroundStateM8) {
    const auto gs = solve_ground_state(8);
    EXPECT_LE(max_abs<double>(bethe_residuals(gs)), 1e-12);
}

TEST(BetheResiduals, ClosePairUsesExactDifferences) {
    // One pair with δ = 1e-14 built from (c, δ): the partner factor (1+δ)/δ is exact.
    BetheState<double> s;
    s.M = 6;
    const cplx c = 0.4, d = 1e-14;
    s.roots = {c + I * (0.5 + d), c - I * (0.5 + d)};
    s.pairs.push_back({0, 1, c, d});
    const auto r = bethe_residuals(s);
    cplx pp = std::pow((s.roots[0] - 0.5 * I) / (s.roots[0] + 0.5 * I), 6);
    EXPECT_LT(std::abs(r[0] - (1.0 - pp * (1.0 + d) / d)) / std::abs(r[0]), 1e-12);
}

TEST(Transfer, VacuumValue) {
    auto s = state_of(6, {});
    const cplx mu(0.3, 0.2);
    EXPECT_LT(std::abs(transfer_eigenvalue(s, mu) - (1.0 + std::pow((mu - 0.5 * I) / (mu + 0.5 * I), 6))), 1e-14);
}

TEST(Transfer, RegularAtRoots) {
    const auto gs = solve_ground_state(8);
    for (const auto& r : gs.roots) {
        const cplx at = transfer_eigenvalue(gs, r);
        // Two-sided means with ε and ε/2, Richardson-combined to O(ε⁴).
        auto mean = [&](double e) { return 0.5 * (transfer_eigenvalue(gs, r + e) + transfer_eigenvalue(gs, r - e)); };
        const cplx lim = (4.0 * mean(5e-4) - mean(1e-3)) / 3.0;
        EXPECT_LT(std::abs(lim - at), 1e-8 * std::abs(at));
        // The jump across the root closes linearly in ε.
        auto jump = [&](double e) { return std::abs(transfer_eigenvalue(gs, r + e) - transfer_eigenvalue(gs, r - e)); };
        EXPECT_NEAR(jump(1e-4) / jump(2e-4), 0.5, 1e-3);
    }
}

TEST(Kernels, TFunctionIdentities) {
    std::mt19937 rng(11);
    std::normal_distribution<double> n;
    for (int k = 0; k < 100; ++k) {
        const cplx x(n(rng), n(rng));
        const cplx lhs = t_fn(x) + t_fn(-x), rhs = 2.0 * M_PI * I * kernel_K(x);
        EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(rhs));
        const cplx c(n(rng), 0.3 * n(rng)), l(n(rng), 0.3 * n(rng));
        const cplx u = t_fn(c - 0.5 * I - l), v = t_fn(l - c - 0.5 * I);
        EXPECT_LT(std::abs(u - v), 1e-12 * std::abs(u));
    }
}

TEST(Kernels, EvenAndNormalized) {
    for (double a : {0.5, 1.0, 1.5, 2.0}) {
        for (double x : {0.1, 0.9, 3.0}) EXPECT_EQ(kernel_K(x, a), kernel_K(-x, a));
        auto f = [a](double x) { return kernel_K(x, a).real(); };
        const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-13);
        EXPECT_NEAR(v, 1.0, 1e-8);
    }
}

TEST(Spinons, HoleAtZeroGivesHalfPi) {
    const auto k = spinon_energy_momentum({0.0, 0.0});
    EXPECT_DOUBLE_EQ(k.dE, M_PI);
}

TEST(Spinons, EmptySet) {
    const auto k = spinon_energy_momentum({});
    EXPECT_EQ(k.dE, 0.0);
    EXPECT_EQ(k.dP, 0.0);
}

TEST(Spinons, OddCountRejected) {
    try {
        spinon_energy_momentum({0.1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OddHoleCount);
    }
}

TEST(Spinons, MomentumReducedToPrincipalRange) {
    for (double a : {-2.0, -0.3, 0.0, 0.5, 3.0})
        for (double b : {-1.0, 0.2, 2.5}) {
            const auto k = spinon_energy_momentum({a, b});
            EXPECT_GT(k.dP, -M_PI);
            EXPECT_LE(k.dP, M_PI);
        }
}

TEST(Energy, HalfFilledTwoSite) {
    auto s = state_of(2, {0.0});
    EXPECT_NEAR(bethe_energy(s), -8.0, 1e-14);
}
