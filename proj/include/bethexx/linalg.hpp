#pragma once

#include "errors.hpp"
#include "precision.hpp"

#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace bethexx {

template <class C>
using Matrix = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
template <class C>
using Vector = Eigen::Matrix<C, Eigen::Dynamic, 1>;

using ComplexMatrix = Matrix<cplx>;
using ComplexVector = Vector<cplx>;

/// A complex number held as log|z| plus unit phase, so products of
/// determinants of size ~M/2 never overflow.
struct LogValue {
    double log_abs = 0.0;
    cplx phase{1.0, 0.0};
    bool zero = false;

    static LogValue from(cplx z) {
        LogValue v;
        const double a = std::abs(z);
        if (a == 0.0) {
            v.zero = true;
            v.log_abs = -std::numeric_limits<double>::infinity();
            v.phase = 1.0;
            return v;
        }
        v.log_abs = std::log(a);
        v.phase = z / a;
        return v;
    }

    template <class C>
    static LogValue from_generic(const C& z) {
        using std::abs;
        using std::log;
        LogValue v;
        const auto a = abs(z);
        if (a == 0) {
            v.zero = true;
            v.log_abs = -std::numeric_limits<double>::infinity();
            return v;
        }
        v.log_abs = static_cast<double>(log(a));
        v.phase = to_double(C(z / a));
        return v;
    }

    cplx value() const { return zero ? cplx(0.0) : std::exp(log_abs) * phase; }

    LogValue& operator*=(const LogValue& o) {
        zero = zero || o.zero;
        log_abs += o.log_abs;
        phase *= o.phase;
        phase /= std::abs(phase);
        return *this;
    }
    LogValue& operator/=(const LogValue& o) {
        if (o.zero) throw Error(ErrorCode::InvalidArgument, "division by zero LogValue");
        log_abs -= o.log_abs;
        phase /= o.phase;
        phase /= std::abs(phase);
        return *this;
    }
    friend LogValue operator*(LogValue a, const LogValue& b) { return a *= b; }
    friend LogValue operator/(LogValue a, const LogValue& b) { return a /= b; }
};

/// Log-determinant via partial-pivot LU. Exact zero pivots give zero.
template <class C>
LogValue log_det(const Matrix<C>& A) {
    using std::abs;
    using std::log;
    if (A.rows() != A.cols()) throw Error(ErrorCode::InvalidArgument, "log_det needs a square matrix");
    if (A.rows() == 0) return {};
    Eigen::PartialPivLU<Matrix<C>> lu(A);
    const auto& U = lu.matrixLU();
    using R = real_of_t<C>;
    R la(0);
    C ph(R(1));
    for (Eigen::Index k = 0; k < U.rows(); ++k) {
        const auto a = abs(U(k, k));
        if (a == 0) {
            LogValue z;
            z.zero = true;
            z.log_abs = -std::numeric_limits<double>::infinity();
            return z;
        }
        la += log(a);
        ph *= U(k, k) / a;
    }
    LogValue v;
    v.log_abs = static_cast<double>(la);
    v.phase = to_double(ph);
    v.phase /= std::abs(v.phase);
    if (lu.permutationP().determinant() < 0) v.phase = -v.phase;
    return v;
}

/// Reciprocal 1-norm condition estimate (Hager/Higham, via Eigen) on a double copy.
template <class C>
double condition_estimate(const Matrix<C>& A) {
    if (A.rows() == 0) return 1.0;
    ComplexMatrix Ad(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) Ad(i, j) = to_double(A(i, j));
    Eigen::PartialPivLU<ComplexMatrix> lu(Ad);
    const double rc = lu.rcond();
    return rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

/// Solve A X = B with partial-pivot LU and one round of iterative refinement.
template <class C>
Matrix<C> lu_solve_refined(const Matrix<C>& A, const Matrix<C>& B) {
    using std::abs;
    Eigen::PartialPivLU<Matrix<C>> lu(A);
    const auto& U = lu.matrixLU();
    for (Eigen::Index k = 0; k < U.rows(); ++k)
        if (abs(U(k, k)) == 0) throw Error(ErrorCode::SingularGaudin, "zero pivot in LU");
    Matrix<C> X = lu.solve(B);
    Matrix<C> R = B - A * X;
    X += lu.solve(R);
    return X;
}

template <class C>
double relative_residual(const Matrix<C>& A, const Matrix<C>& X, const Matrix<C>& B) {
    using std::abs;
    Matrix<C> R = A * X - B;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < R.size(); ++i) num = std::max(num, static_cast<double>(abs(R.data()[i])));
    for (Eigen::Index i = 0; i < B.size(); ++i) den = std::max(den, static_cast<double>(abs(B.data()[i])));
    return den > 0 ? num / den : num;
}

template <class C>
ComplexMatrix to_double_matrix(const Matrix<C>& A) {
    ComplexMatrix out(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) out(i, j) = to_double(A(i, j));
    return out;
}

// Binary dump: int64 rows, int64 cols, then rows*cols (re, im) float64 pairs,
// row-major, little-endian.
inline void dump_matrix(const ComplexMatrix& A, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    const std::int64_t r = A.rows(), c = A.cols();
    f.write(reinterpret_cast<const char*>(&r), sizeof r);
    f.write(reinterpret_cast<const char*>(&c), sizeof c);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            const double re = A(i, j).real(), im = A(i, j).imag();
            f.write(reinterpret_cast<const char*>(&re), sizeof re);
            f.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

inline ComplexMatrix load_matrix(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    std::int64_t r = 0, c = 0;
    f.read(reinterpret_cast<char*>(&r), sizeof r);
    f.read(reinterpret_cast<char*>(&c), sizeof c);
    ComplexMatrix A(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) {
            double re = 0, im = 0;
            f.read(reinterpret_cast<char*>(&re), sizeof re);
            f.read(reinterpret_cast<char*>(&im), sizeof im);
            A(i, j) = {re, im};
        }
    return A;
}

}  // namespace bethexx
