#include "muse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace muse::kernels {

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Scanning source rows in order keeps columns ascending in each output row.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      const std::size_t dst = cursor[col_idx[p]]++;
      t.col_idx[dst] = static_cast<std::uint32_t>(r);
      t.values[dst] = values[p];
    }
  }
  return t;
}

namespace serial {

namespace {

template <typename T>
void gemm_ref(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
              const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  auto at = [&](std::size_t i, std::size_t p) {
    return ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
  };
  auto bt = [&](std::size_t p, std::size_t j) {
    return tb == Trans::no ? b[p * ldb + j] : b[j * ldb + p];
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = 0;
      for (std::size_t p = 0; p < k; ++p) sum += at(i, p) * bt(p, j);
      T& out = c[i * ldc + j];
      out = beta == T(0) ? sum : beta * out + sum;
    }
  }
}

template <typename T>
void gemm_scaled_ref(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                     const T* a, std::size_t lda, const T* row_w, const T* col_w,
                     const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  std::vector<T> scaled(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T v = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
      scaled[i * k + p] = v * (row_w[i] + col_w[p]);
    }
  }
  gemm_ref<T>(Trans::no, tb, m, n, k, scaled.data(), k, b, ldb, beta, c, ldc);
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
  gemm_ref(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc) {
  gemm_ref(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const double* a, std::size_t lda, const double* row_w, const double* col_w,
                   const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  gemm_scaled_ref(ta, tb, m, n, k, a, lda, row_w, col_w, b, ldb, beta, c, ldc);
}

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const float* a, std::size_t lda, const float* row_w, const float* col_w,
                   const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc) {
  gemm_scaled_ref(ta, tb, m, n, k, a, lda, row_w, col_w, b, ldb, beta, c, ldc);
}

void spmm(const CsrMatrix& s, const double* b, std::size_t n, double* c) {
  std::fill(c, c + s.rows * n, 0.0);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p) {
      const double v = s.values[p];
      const double* src = b + static_cast<std::size_t>(s.col_idx[p]) * n;
      for (std::size_t j = 0; j < n; ++j) c[r * n + j] += v * src[j];
    }
  }
}

void exp_affine(double* x, std::size_t n, double a, double b) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(a * x[i] + b);
}

void exp_affine_rows(double* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double& v = x[r * cols + j];
      v = std::exp(a * v + b);
      acc += v;
    }
    row_sums[r] = acc;
  }
}

void exp_affine_rows(float* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      float& v = x[r * cols + j];
      v = static_cast<float>(std::exp(a * v + b));
      acc += v;
    }
    row_sums[r] = acc;
  }
}

}  // namespace serial
}  // namespace muse::kernels
