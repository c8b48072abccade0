#include "gansic/matrix.hpp"

#include <stdexcept>

#ifdef GANSIC_WITH_BLAS
#include <cblas.h>
#endif

namespace gansic {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

namespace {

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

#ifndef GANSIC_WITH_BLAS
// Portable fallback kernels. ikj order keeps the inner loop contiguous on
// both operands so the compiler can vectorize it.
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
}

void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            double* ci = c.row(i);
            const double aki = ak[i];
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
}

void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    // b gets transposed into scratch once so the hot loop stays contiguous.
    DenseMatrix bt(b.cols, b.rows);
    for (std::size_t i = 0; i < b.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) bt.at(j, i) = b.at(i, j);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            const double* btk = bt.row(k);
            for (std::size_t j = 0; j < b.rows; ++j) ci[j] += aik * btk[j];
        }
    }
}
#endif

}  // namespace

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check(a.cols == b.rows, "matmul: inner dimensions differ");
    c = DenseMatrix(a.rows, b.cols);
    if (a.rows == 0 || b.cols == 0 || a.cols == 0) return;
#ifdef GANSIC_WITH_BLAS
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)a.rows, (int)b.cols,
                (int)a.cols, 1.0, a.data.data(), (int)a.cols, b.data.data(), (int)b.cols,
                0.0, c.data.data(), (int)c.cols);
#else
    gemm_nn(a, b, c);
#endif
}

void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    c = DenseMatrix(a.cols, b.cols);
    if (a.cols == 0 || b.cols == 0 || a.rows == 0) return;
#ifdef GANSIC_WITH_BLAS
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)a.cols, (int)b.cols,
                (int)a.rows, 1.0, a.data.data(), (int)a.cols, b.data.data(), (int)b.cols,
                0.0, c.data.data(), (int)c.cols);
#else
    gemm_tn(a, b, c);
#endif
}

void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
    check(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    c = DenseMatrix(a.rows, b.rows);
    if (a.rows == 0 || b.rows == 0 || a.cols == 0) return;
#ifdef GANSIC_WITH_BLAS
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)a.rows, (int)b.rows,
                (int)a.cols, 1.0, a.data.data(), (int)a.cols, b.data.data(), (int)b.cols,
                0.0, c.data.data(), (int)c.cols);
#else
    gemm_nt(a, b, c);
#endif
}

void matvec(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
    check(a.cols == x.size() && a.rows == y.size(), "matvec: shape mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += ai[j] * x[j];
        y[i] = acc;
    }
}

void add_inplace(DenseMatrix& dst, const DenseMatrix& src) {
    check(dst.same_shape(src), "add_inplace: shape mismatch");
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void scale_inplace(DenseMatrix& m, double factor) {
    for (double& v : m.data) v *= factor;
}

}  // namespace gansic
