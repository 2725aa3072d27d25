#pragma once

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_complex.hpp>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <string>

namespace bethexx {

using ext_real = boost::multiprecision::cpp_bin_float_50;
using ext_complex = boost::multiprecision::cpp_complex_50;
using cplx = std::complex<double>;

template <class Real>
struct scalar_traits;

template <>
struct scalar_traits<double> {
    using complex = std::complex<double>;
    static constexpr const char* name = "double";
};

template <>
struct scalar_traits<ext_real> {
    using complex = ext_complex;
    static constexpr const char* name = "extended";
};

template <class Real>
using complex_t = typename scalar_traits<Real>::complex;

template <class C>
struct real_of;
template <>
struct real_of<std::complex<double>> { using type = double; };
template <>
struct real_of<ext_complex> { using type = ext_real; };
template <class C>
using real_of_t = typename real_of<C>::type;

template <class Real>
inline Real pi_v() { return boost::math::constants::pi<Real>(); }

template <class Real>
inline complex_t<Real> imag_unit() { return complex_t<Real>(Real(0), Real(1)); }

template <class Real>
inline complex_t<Real> make_complex(double re, double im = 0.0) {
    return complex_t<Real>(Real(re), Real(im));
}

template <class Real>
inline complex_t<Real> from_double(cplx z) { return make_complex<Real>(z.real(), z.imag()); }

template <class C>
inline cplx to_double(const C& z) {
    using std::imag;
    using std::real;
    return {static_cast<double>(real(z)), static_cast<double>(imag(z))};
}

inline cplx to_double(const cplx& z) { return z; }

enum class Precision { double_, extended };

// BETHEXX_PRECISION=extended switches the default; anything else is double.
inline Precision precision_from_env() {
    const char* v = std::getenv("BETHEXX_PRECISION");
    if (v && std::string(v) == "extended") return Precision::extended;
    return Precision::double_;
}

inline const char* to_string(Precision p) { return p == Precision::extended ? "extended" : "double"; }

}  // namespace bethexx
