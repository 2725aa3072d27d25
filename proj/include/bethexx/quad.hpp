#pragma once

#include "errors.hpp"
#include "precision.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <string>

namespace bethexx {

struct QuadOptions {
    double alpha = 0.2;    // contour ℝ + iα for shifted integrals
    int nodes = 61;        // Kronrod rule: 15, 31, 41, 51 or 61
    double tol = 1e-13;    // relative tolerance handed to the adaptive rule
    unsigned max_depth = 18;
    double fail_above = 1e-9;  // error estimates above this raise QuadratureFailure
};

namespace detail {

template <unsigned N, class F>
cplx kronrod_line(F&& f, const QuadOptions& o, double* err) {
    const double inf = std::numeric_limits<double>::infinity();
    return boost::math::quadrature::gauss_kronrod<double, N>::integrate(f, -inf, inf, o.max_depth, o.tol, err);
}

}  // namespace detail

/// ∫ f(ν) dν along ν = s + iα, s ∈ ℝ. The error estimate is absolute.
template <class F>
cplx integrate_line(F&& f, double alpha, const QuadOptions& o = {}, double* err_out = nullptr) {
    const cplx shift(0.0, alpha);
    auto g = [&](double s) -> cplx { return f(cplx(s) + shift); };
    double err = 0.0;
    cplx v;
    switch (o.nodes) {
        case 15: v = detail::kronrod_line<15>(g, o, &err); break;
        case 31: v = detail::kronrod_line<31>(g, o, &err); break;
        case 41: v = detail::kronrod_line<41>(g, o, &err); break;
        case 51: v = detail::kronrod_line<51>(g, o, &err); break;
        case 61: v = detail::kronrod_line<61>(g, o, &err); break;
        default: throw Error(ErrorCode::InvalidArgument, "quadrature nodes must be 15, 31, 41, 51 or 61");
    }
    if (!std::isfinite(std::abs(v)) || err > o.fail_above)
        throw Error(ErrorCode::QuadratureFailure, "error estimate " + std::to_string(err));
    if (err_out) *err_out = err;
    return v;
}

}  // namespace bethexx
