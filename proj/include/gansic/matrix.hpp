#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gansic {

// Dense row-major matrix of doubles. Rows/cols are fixed at construction;
// all heavy products go through the free functions below so the BLAS
// backend stays in one translation unit.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::span<double> row_span(std::size_t r) { return {row(r), cols}; }
    std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

    std::size_t size() const { return data.size(); }

    static DenseMatrix identity(std::size_t n);

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
};

// c = a * b
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// c = a^T * b
void matmul_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
// c = a * b^T
void matmul_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows, b.cols);
    matmul(a, b, c);
    return c;
}
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.cols, b.cols);
    matmul_tn(a, b, c);
    return c;
}
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows, b.rows);
    matmul_nt(a, b, c);
    return c;
}

// y = a * x for a single vector
void matvec(const DenseMatrix& a, std::span<const double> x, std::span<double> y);

void add_inplace(DenseMatrix& dst, const DenseMatrix& src);
void scale_inplace(DenseMatrix& m, double factor);

}  // namespace gansic
