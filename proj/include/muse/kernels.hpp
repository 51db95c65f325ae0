#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Dense and sparse linear-algebra kernels.
//
// Two implementations share one signature:
//   serial::  textbook loops, kept as the reference for tests and benchmarks
//   omp::     cache-blocked, OpenMP-parallel production kernels
//
// Every omp:: kernel partitions work over output elements only and
// accumulates each element in a fixed order, so results are bitwise
// identical for any thread count.

namespace muse::kernels {

// Compressed sparse row matrix.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;    // rows + 1 entries
  std::vector<std::uint32_t> col_idx;  // nnz entries, ascending within a row
  std::vector<double> values;          // nnz entries

  std::size_t nnz() const { return values.size(); }
  CsrMatrix transposed() const;
};

enum class Trans { no, yes };

namespace serial {

// C = op(A) * op(B) + beta * C, all row-major. op(A) is m x k, op(B) is k x n.
// With beta == 0 the previous contents of C are ignored.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

// gemm with op(A)[i, p] replaced by op(A)[i, p] * (row_w[i] + col_w[p]);
// row_w has m entries, col_w has k.
void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const double* a, std::size_t lda, const double* row_w, const double* col_w,
                   const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc);

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc);

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const float* a, std::size_t lda, const float* row_w, const float* col_w,
                   const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc);

// C = S * B where B is S.cols x n and C is S.rows x n (dense, row-major, packed).
void spmm(const CsrMatrix& s, const double* b, std::size_t n, double* c);

// x[i] = exp(a * x[i] + b) via std::exp.
void exp_affine(double* x, std::size_t n, double a, double b);

// exp_affine over a row-major rows x cols block, also writing each row's sum.
void exp_affine_rows(double* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums);

// Float storage; the exponent and the row sums are evaluated in double.
void exp_affine_rows(float* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums);

}  // namespace serial

namespace omp {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const double* a, std::size_t lda, const double* row_w, const double* col_w,
                   const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc);

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc);

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const float* a, std::size_t lda, const float* row_w, const float* col_w,
                   const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc);

void spmm(const CsrMatrix& s, const double* b, std::size_t n, double* c);

// Vectorised exp(a * x + b), within a few ulp of std::exp; arguments below
// -708 give 0.
void exp_affine(double* x, std::size_t n, double a, double b);

// Row sums use eight interleaved partial sums combined pairwise, one row per
// thread.
void exp_affine_rows(double* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums);
void exp_affine_rows(float* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums);

}  // namespace omp

// Production entry points.
inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, std::size_t lda, const double* b, std::size_t ldb,
                 double beta, double* c, std::size_t ldc) {
  omp::gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda, const double* row_w, const double* col_w,
                          const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  omp::gemm_scaled_a(ta, tb, m, n, k, a, lda, row_w, col_w, b, ldb, beta, c, ldc);
}

inline void spmm(const CsrMatrix& s, const double* b, std::size_t n, double* c) {
  omp::spmm(s, b, n, c);
}

inline void exp_affine(double* x, std::size_t n, double a, double b) { omp::exp_affine(x, n, a, b); }

inline void exp_affine_rows(double* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  omp::exp_affine_rows(x, rows, cols, a, b, row_sums);
}

inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                 const float* a, std::size_t lda, const float* b, std::size_t ldb,
                 float beta, float* c, std::size_t ldc) {
  omp::gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                          const float* a, std::size_t lda, const float* row_w, const float* col_w,
                          const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc) {
  omp::gemm_scaled_a(ta, tb, m, n, k, a, lda, row_w, col_w, b, ldb, beta, c, ldc);
}

inline void exp_affine_rows(float* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  omp::exp_affine_rows(x, rows, cols, a, b, row_sums);
}

// Number of worker threads the omp:: kernels will use (1 without OpenMP).
int max_threads();

}  // namespace muse::kernels
