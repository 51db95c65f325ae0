#include "muse/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef __AVX512F__
#include <immintrin.h>
#endif

namespace muse::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {
namespace {

// Register tile (kMR x nr<T>) and cache blocks. kMC and kNC are multiples of
// the register tile so only the matrix edge produces partial tiles.
constexpr std::size_t kMR = 12;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 96;
constexpr std::size_t kNC = 2048;

// Two 512-bit vectors per tile row.
template <typename T>
constexpr std::size_t nr = 128 / sizeof(T);

// Work below this many multiply-adds stays on the calling thread.
constexpr std::size_t kParallelThreshold = 1u << 16;

template <typename T>
struct Operand {
  const T* data;
  std::size_t ld;
  Trans trans;
  // When set, op(A)[i, p] is scaled by row_w[i] + col_w[p] during packing.
  const T* row_w = nullptr;
  const T* col_w = nullptr;
};

// op(B)[pc:pc+kc, jc:jc+nc] -> column panels of width nr<T>, zero padded.
template <typename T>
void pack_b(const Operand<T>& b, std::size_t pc, std::size_t kc, std::size_t jc, std::size_t nc, T* out) {
  constexpr std::size_t kNR = nr<T>;
  const std::size_t panels = (nc + kNR - 1) / kNR;
#pragma omp parallel for schedule(static) if (kc * nc > kParallelThreshold)
  for (std::size_t q = 0; q < panels; ++q) {
    const std::size_t jr = q * kNR;
    const std::size_t cols = std::min(kNR, nc - jr);
    T* dst = out + q * kc * kNR;
    if (cols < kNR) std::fill(dst, dst + kc * kNR, T(0));
    if (b.trans == Trans::no) {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = b.data + (pc + p) * b.ld + jc + jr;
        for (std::size_t j = 0; j < cols; ++j) dst[p * kNR + j] = src[j];
      }
    } else {
      for (std::size_t j = 0; j < cols; ++j) {
        const T* src = b.data + (jc + jr + j) * b.ld + pc;
        for (std::size_t p = 0; p < kc; ++p) dst[p * kNR + j] = src[p];
      }
    }
  }
}

// op(A)[ic:ic+mc, pc:pc+kc] -> row panels of height kMR, zero padded.
template <typename T>
void pack_a(const Operand<T>& a, std::size_t ic, std::size_t mc, std::size_t pc, std::size_t kc, T* out) {
  for (std::size_t ir = 0; ir < mc; ir += kMR) {
    const std::size_t mr = std::min(kMR, mc - ir);
    T* panel = out + (ir / kMR) * kc * kMR;
    if (mr < kMR) std::fill(panel, panel + kc * kMR, T(0));
    if (a.trans == Trans::no) {
      const T* rows[kMR];
      for (std::size_t r = 0; r < mr; ++r) rows[r] = a.data + (ic + ir + r) * a.ld + pc;
      if (a.row_w) {
        const T* wr = a.row_w + ic + ir;
        const T* wc = a.col_w + pc;
        for (std::size_t p = 0; p < kc; ++p) {
          for (std::size_t r = 0; r < mr; ++r) panel[p * kMR + r] = rows[r][p] * (wr[r] + wc[p]);
        }
      } else {
        for (std::size_t p = 0; p < kc; ++p) {
          for (std::size_t r = 0; r < mr; ++r) panel[p * kMR + r] = rows[r][p];
        }
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = a.data + (pc + p) * a.ld + ic + ir;
        T* dst = panel + p * kMR;
        if (a.row_w) {
          const T* wr = a.row_w + ic + ir;
          const T wp = a.col_w[pc + p];
          for (std::size_t r = 0; r < mr; ++r) dst[r] = src[r] * (wr[r] + wp);
        } else {
          for (std::size_t r = 0; r < mr; ++r) dst[r] = src[r];
        }
      }
    }
  }
}

#ifdef __AVX512F__
inline void micro_kernel(std::size_t kc, const double* __restrict ap, const double* __restrict bp,
                         double* __restrict tile) {
  constexpr std::size_t kNR = nr<double>;
  __m512d acc[kMR][2];
#pragma GCC unroll 12
  for (std::size_t r = 0; r < kMR; ++r) acc[r][0] = acc[r][1] = _mm512_setzero_pd();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m512d b0 = _mm512_loadu_pd(bp + p * kNR);
    const __m512d b1 = _mm512_loadu_pd(bp + p * kNR + 8);
    const double* aa = ap + p * kMR;
#pragma GCC unroll 12
    for (std::size_t r = 0; r < kMR; ++r) {
      const __m512d av = _mm512_set1_pd(aa[r]);
      acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
    }
  }
#pragma GCC unroll 12
  for (std::size_t r = 0; r < kMR; ++r) {
    _mm512_storeu_pd(tile + r * kNR, acc[r][0]);
    _mm512_storeu_pd(tile + r * kNR + 8, acc[r][1]);
  }
}

inline void micro_kernel(std::size_t kc, const float* __restrict ap, const float* __restrict bp,
                         float* __restrict tile) {
  constexpr std::size_t kNR = nr<float>;
  __m512 acc[kMR][2];
#pragma GCC unroll 12
  for (std::size_t r = 0; r < kMR; ++r) acc[r][0] = acc[r][1] = _mm512_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m512 b0 = _mm512_loadu_ps(bp + p * kNR);
    const __m512 b1 = _mm512_loadu_ps(bp + p * kNR + 16);
    const float* aa = ap + p * kMR;
#pragma GCC unroll 12
    for (std::size_t r = 0; r < kMR; ++r) {
      const __m512 av = _mm512_set1_ps(aa[r]);
      acc[r][0] = _mm512_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_ps(av, b1, acc[r][1]);
    }
  }
#pragma GCC unroll 12
  for (std::size_t r = 0; r < kMR; ++r) {
    _mm512_storeu_ps(tile + r * kNR, acc[r][0]);
    _mm512_storeu_ps(tile + r * kNR + 16, acc[r][1]);
  }
}
#else
template <typename T>
inline void micro_kernel(std::size_t kc, const T* __restrict ap, const T* __restrict bp, T* __restrict tile) {
  constexpr std::size_t kNR = nr<T>;
  T acc[kMR][kNR] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* bb = bp + p * kNR;
    const T* aa = ap + p * kMR;
    for (std::size_t r = 0; r < kMR; ++r) {
      const T av = aa[r];
#pragma omp simd
      for (std::size_t j = 0; j < kNR; ++j) acc[r][j] += av * bb[j];
    }
  }
  std::memcpy(tile, acc, sizeof(acc));
}
#endif

template <typename T>
void gemm_packed(const Operand<T>& op_a, const Operand<T>& op_b, std::size_t m, std::size_t n, std::size_t k,
                 T beta, T* c, std::size_t ldc) {
  constexpr std::size_t kNR = nr<T>;
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == T(0) ? T(0) : beta * c[i * ldc + j];
    }
    return;
  }
  const bool parallel = m * n * k > kParallelThreshold;

  std::vector<T> packed_b(kKC * ((std::min(n, kNC) + kNR - 1) / kNR) * kNR);
  for (std::size_t jc = 0; jc < n; jc += kNC) {
    const std::size_t nc = std::min(kNC, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKC) {
      const std::size_t kc = std::min(kKC, k - pc);
      const bool first = pc == 0;
      pack_b(op_b, pc, kc, jc, nc, packed_b.data());

      const std::size_t row_blocks = (m + kMC - 1) / kMC;
#pragma omp parallel if (parallel)
      {
        std::vector<T> packed_a(kMC * kKC);
        T tile[kMR * kNR];
#pragma omp for schedule(static)
        for (std::size_t blk = 0; blk < row_blocks; ++blk) {
          const std::size_t ic = blk * kMC;
          const std::size_t mc = std::min(kMC, m - ic);
          pack_a(op_a, ic, mc, pc, kc, packed_a.data());
          for (std::size_t jr = 0; jr < nc; jr += kNR) {
            const std::size_t cols = std::min(kNR, nc - jr);
            const T* bp = packed_b.data() + (jr / kNR) * kc * kNR;
            for (std::size_t ir = 0; ir < mc; ir += kMR) {
              const std::size_t mr = std::min(kMR, mc - ir);
              micro_kernel(kc, packed_a.data() + (ir / kMR) * kc * kMR, bp, tile);
              for (std::size_t r = 0; r < mr; ++r) {
                T* crow = c + (ic + ir + r) * ldc + jc + jr;
                const T* trow = tile + r * kNR;
                if (!first) {
                  for (std::size_t j = 0; j < cols; ++j) crow[j] += trow[j];
                } else if (beta == T(0)) {
                  for (std::size_t j = 0; j < cols; ++j) crow[j] = trow[j];
                } else {
                  for (std::size_t j = 0; j < cols; ++j) crow[j] = beta * crow[j] + trow[j];
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
  gemm_packed<double>({a, lda, ta}, {b, ldb, tb}, m, n, k, beta, c, ldc);
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, std::size_t lda, const float* b, std::size_t ldb,
          float beta, float* c, std::size_t ldc) {
  gemm_packed<float>({a, lda, ta}, {b, ldb, tb}, m, n, k, beta, c, ldc);
}

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const double* a, std::size_t lda, const double* row_w, const double* col_w,
                   const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
  gemm_packed<double>({a, lda, ta, row_w, col_w}, {b, ldb, tb}, m, n, k, beta, c, ldc);
}

void gemm_scaled_a(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                   const float* a, std::size_t lda, const float* row_w, const float* col_w,
                   const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc) {
  gemm_packed<float>({a, lda, ta, row_w, col_w}, {b, ldb, tb}, m, n, k, beta, c, ldc);
}

void spmm(const CsrMatrix& s, const double* b, std::size_t n, double* c) {
  const bool parallel = s.nnz() * n > kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* out = c + r * n;
    std::fill(out, out + n, 0.0);
    for (std::size_t p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p) {
      const double v = s.values[p];
      const double* src = b + static_cast<std::size_t>(s.col_idx[p]) * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) out[j] += v * src[j];
    }
  }
}

namespace {

// exp(x) = 2^k exp(r), r = x - k ln2 in [-ln2/2, ln2/2], exp(r) by its
// degree-13 Taylor polynomial (truncation error below 1e-17).
inline double exp_poly(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kRound = 0x1.8p52;  // adding this rounds to the nearest integer
  const double xc = x < -708.0 ? -708.0 : (x > 709.0 ? 709.0 : x);
  const double shifted = xc * kLog2e + kRound;
  const double k = shifted - kRound;
  const double r = (xc - k * kLn2Hi) - k * kLn2Lo;
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  // The low mantissa bits of `shifted` hold k; move k + 1023 into the exponent field.
  const std::int64_t ki = std::bit_cast<std::int64_t>(shifted) - std::bit_cast<std::int64_t>(kRound);
  const double scale = std::bit_cast<double>((ki + 1023) << 52);
  return x < -708.0 ? 0.0 : p * scale;
}

}  // namespace

void exp_affine(double* x, std::size_t n, double a, double b) {
#pragma omp parallel for simd schedule(static) if (n > kParallelThreshold)
  for (std::size_t i = 0; i < n; ++i) x[i] = exp_poly(a * x[i] + b);
}

void exp_affine_rows(double* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  constexpr std::size_t kLanes = 8;
#pragma omp parallel for schedule(static) if (rows * cols > kParallelThreshold)
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * cols;
    double lanes[kLanes] = {};
    std::size_t j = 0;
    for (; j + kLanes <= cols; j += kLanes) {
#pragma omp simd
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double v = exp_poly(a * row[j + l] + b);
        row[j + l] = v;
        lanes[l] += v;
      }
    }
    for (std::size_t l = 0; j < cols; ++j, ++l) {
      row[j] = exp_poly(a * row[j] + b);
      lanes[l] += row[j];
    }
    row_sums[r] = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
  }
}

void exp_affine_rows(float* x, std::size_t rows, std::size_t cols, double a, double b, double* row_sums) {
  constexpr std::size_t kLanes = 8;
#pragma omp parallel for schedule(static) if (rows * cols > kParallelThreshold)
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = x + r * cols;
    double lanes[kLanes] = {};
    std::size_t j = 0;
    for (; j + kLanes <= cols; j += kLanes) {
#pragma omp simd
      for (std::size_t l = 0; l < kLanes; ++l) {
        const float v = static_cast<float>(exp_poly(a * row[j + l] + b));
        row[j + l] = v;
        lanes[l] += v;
      }
    }
    for (std::size_t l = 0; j < cols; ++j, ++l) {
      row[j] = static_cast<float>(exp_poly(a * row[j] + b));
      lanes[l] += row[j];
    }
    row_sums[r] = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
  }
}

}  // namespace omp
}  // namespace muse::kernels
