#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "muse/kernels.hpp"
#include "muse/random.hpp"
#include "support.hpp"

using namespace muse;
using kernels::Trans;

namespace {

struct GemmCase {
  Trans ta, tb;
  std::size_t m, n, k;
  double beta;
};

// Runs both implementations on the same random operands.
void compare_gemm(const GemmCase& g, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t lda = g.ta == Trans::no ? g.k : g.m;
  const std::size_t ldb = g.tb == Trans::no ? g.n : g.k;
  const auto a = testing::random_values(rng, g.m * g.k);
  const auto b = testing::random_values(rng, g.k * g.n);
  const auto c0 = testing::random_values(rng, g.m * g.n);
  auto c_ref = c0, c_fast = c0;
  kernels::serial::gemm(g.ta, g.tb, g.m, g.n, g.k, a.data(), lda, b.data(), ldb, g.beta, c_ref.data(), g.n);
  kernels::omp::gemm(g.ta, g.tb, g.m, g.n, g.k, a.data(), lda, b.data(), ldb, g.beta, c_fast.data(), g.n);
  for (std::size_t i = 0; i < c_ref.size(); ++i) {
    REQUIRE(c_fast[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
  }
}

kernels::CsrMatrix random_csr(Rng& rng, std::size_t rows, std::size_t cols, double density) {
  kernels::CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.push_back(0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng.bernoulli(density)) {
        m.col_idx.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(rng.uniform(-1.0, 1.0));
      }
    }
    m.row_ptr.push_back(m.values.size());
  }
  return m;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("gemm matches the reference loops for every transpose combination") {
    std::uint64_t seed = 1;
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (Trans tb : {Trans::no, Trans::yes}) {
        for (double beta : {0.0, 1.0, -0.5}) {
          compare_gemm({ta, tb, 1, 1, 1, beta}, seed++);
          compare_gemm({ta, tb, 7, 5, 3, beta}, seed++);
          compare_gemm({ta, tb, 13, 17, 300, beta}, seed++);
          compare_gemm({ta, tb, 101, 37, 9, beta}, seed++);
        }
      }
    }
  }

  TEST_CASE("gemm crosses cache-block edges") {
    compare_gemm({Trans::no, Trans::yes, 197, 2100, 70, 0.0}, 11);
    compare_gemm({Trans::yes, Trans::no, 300, 20, 600, 1.0}, 12);
    compare_gemm({Trans::yes, Trans::no, 101, 35, 257, 0.0}, 13);
  }

  TEST_CASE("gemm_scaled_a matches the reference for both layouts of A") {
    Rng rng(31);
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (const auto& [m, n, k] : {std::array<std::size_t, 3>{7, 5, 3}, {130, 64, 300}, {25, 17, 12}}) {
        const std::size_t lda = ta == Trans::no ? k : m;
        const auto a = testing::random_values(rng, m * k);
        const auto b = testing::random_values(rng, k * n);
        const auto rw = testing::random_values(rng, m);
        const auto cw = testing::random_values(rng, k);
        const auto c0 = testing::random_values(rng, m * n);
        auto c_ref = c0, c_fast = c0;
        kernels::serial::gemm_scaled_a(ta, Trans::no, m, n, k, a.data(), lda, rw.data(), cw.data(), b.data(), n, 1.0,
                                       c_ref.data(), n);
        kernels::omp::gemm_scaled_a(ta, Trans::no, m, n, k, a.data(), lda, rw.data(), cw.data(), b.data(), n, 1.0,
                                    c_fast.data(), n);
        for (std::size_t i = 0; i < c_ref.size(); ++i) {
          REQUIRE(c_fast[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("float gemm stays within float rounding of a double product") {
    Rng rng(41);
    std::uint64_t cases = 0;
    for (Trans ta : {Trans::no, Trans::yes}) {
      for (Trans tb : {Trans::no, Trans::yes}) {
        for (const auto& [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {13, 33, 300}, {101, 70, 9}, {30, 2100, 260}}) {
          for (bool scaled : {false, true}) {
            ++cases;
            const std::size_t lda = ta == Trans::no ? k : m;
            const std::size_t ldb = tb == Trans::no ? n : k;
            const auto ad = testing::random_values(rng, m * k);
            const auto bd = testing::random_values(rng, k * n);
            const auto rwd = testing::random_values(rng, m);
            const auto cwd = testing::random_values(rng, k);
            const auto cd = testing::random_values(rng, m * n);
            const std::vector<float> a(ad.begin(), ad.end()), b(bd.begin(), bd.end());
            const std::vector<float> rw(rwd.begin(), rwd.end()), cw(cwd.begin(), cwd.end());
            std::vector<float> c(cd.begin(), cd.end());
            // Exact reference on the rounded operands, and the size of its terms.
            std::vector<double> ref(m * n), mag(m * n);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                double sum = 0.0, abs_sum = 0.0;
                for (std::size_t p = 0; p < k; ++p) {
                  double av = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
                  if (scaled) av *= double(rw[i]) + double(cw[p]);
                  const double term = av * (tb == Trans::no ? b[p * ldb + j] : b[j * ldb + p]);
                  sum += term;
                  abs_sum += std::abs(term);
                }
                ref[i * n + j] = 0.5 * c[i * n + j] + sum;
                mag[i * n + j] = 0.5 * std::abs(c[i * n + j]) + abs_sum;
              }
            }
            for (bool fast : {false, true}) {
              auto out = c;
              if (scaled && fast) {
                kernels::omp::gemm_scaled_a(ta, tb, m, n, k, a.data(), lda, rw.data(), cw.data(), b.data(), ldb, 0.5f,
                                            out.data(), n);
              } else if (scaled) {
                kernels::serial::gemm_scaled_a(ta, tb, m, n, k, a.data(), lda, rw.data(), cw.data(), b.data(), ldb,
                                               0.5f, out.data(), n);
              } else if (fast) {
                kernels::omp::gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, 0.5f, out.data(), n);
              } else {
                kernels::serial::gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, 0.5f, out.data(), n);
              }
              const double tol = 4.0 * static_cast<double>(k + 2) * std::numeric_limits<float>::epsilon();
              for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(std::abs(out[i] - ref[i]) <= tol * mag[i]);
            }
          }
        }
      }
    }
    CHECK(cases == 32);
  }

  TEST_CASE("gemm with beta zero ignores NaN in C") {
    std::vector<double> a{1, 2, 3, 4}, b{1, 0, 0, 1}, c(4, std::nan(""));
    kernels::omp::gemm(Trans::no, Trans::no, 2, 2, 2, a.data(), 2, b.data(), 2, 0.0, c.data(), 2);
    CHECK(c == std::vector<double>{1, 2, 3, 4});
  }

  TEST_CASE("gemm with k = 0 scales C by beta") {
    std::vector<double> c{1, 2, 3, 4};
    kernels::omp::gemm(Trans::no, Trans::no, 2, 2, 0, nullptr, 0, nullptr, 2, 2.0, c.data(), 2);
    CHECK(c == std::vector<double>{2, 4, 6, 8});
  }

  TEST_CASE("spmm matches the reference and dense product") {
    Rng rng(5);
    const auto s = random_csr(rng, 40, 30, 0.2);
    const auto b = testing::random_values(rng, 30 * 7);
    std::vector<double> ref(40 * 7), fast(40 * 7, 99.0);
    kernels::serial::spmm(s, b.data(), 7, ref.data());
    kernels::omp::spmm(s, b.data(), 7, fast.data());
    CHECK(ref == fast);  // same accumulation order
  }

  TEST_CASE("transpose round-trips and keeps columns sorted") {
    Rng rng(6);
    const auto s = random_csr(rng, 12, 9, 0.3);
    const auto t = s.transposed();
    CHECK(t.rows == 9);
    CHECK(t.cols == 12);
    CHECK(t.nnz() == s.nnz());
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t p = t.row_ptr[r] + 1; p < t.row_ptr[r + 1]; ++p) CHECK(t.col_idx[p - 1] < t.col_idx[p]);
    }
    const auto back = t.transposed();
    CHECK(back.row_ptr == s.row_ptr);
    CHECK(back.col_idx == s.col_idx);
    CHECK(back.values == s.values);
  }

  TEST_CASE("vectorised exp agrees with std::exp") {
    std::vector<double> xs;
    for (double x = -40.0; x <= 40.0; x += 0.0137) xs.push_back(x);
    xs.insert(xs.end(), {0.0, -0.0, 1e-300, -1e-300, 700.0, -707.9, -745.0, -1e6});
    auto fast = xs;
    auto ref = xs;
    kernels::omp::exp_affine(fast.data(), fast.size(), 1.0, 0.0);
    kernels::serial::exp_affine(ref.data(), ref.size(), 1.0, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] < -708.0) {
        CHECK(fast[i] == 0.0);
      } else {
        CHECK(std::abs(fast[i] - ref[i]) <= 4e-16 * ref[i]);
      }
    }
  }

  TEST_CASE("exp keeps NaN and infinities") {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> x{std::numeric_limits<double>::quiet_NaN(), -inf, 0.0, 1.0};
    kernels::omp::exp_affine(x.data(), x.size(), 1.0, 0.0);
    CHECK(std::isnan(x[0]));
    CHECK(x[1] == 0.0);
    CHECK(x[2] == 1.0);
  }

  TEST_CASE("exp_affine applies the affine map first") {
    std::vector<double> x{0.0, 0.5, 1.0};
    kernels::omp::exp_affine(x.data(), x.size(), 2.0, -2.0);
    CHECK(x[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(x[2] == 1.0);
  }

  TEST_CASE("exp_affine_rows matches the reference values and row sums") {
    Rng rng(21);
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t cols : {1, 7, 8, 9, 130}) {
      const std::size_t rows = 13;
      auto x = testing::random_values(rng, rows * cols);
      x[0] = -inf;
      auto fast = x;
      auto ref = x;
      std::vector<double> fast_sums(rows), ref_sums(rows);
      kernels::omp::exp_affine_rows(fast.data(), rows, cols, 3.0, -3.0, fast_sums.data());
      kernels::serial::exp_affine_rows(ref.data(), rows, cols, 3.0, -3.0, ref_sums.data());
      CHECK(fast[0] == 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(fast[i] - ref[i]) <= 4e-16 * ref[i]);
      for (std::size_t r = 0; r < rows; ++r) {
        CHECK(fast_sums[r] == doctest::Approx(ref_sums[r]).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("float exp_affine_rows rounds each value once and sums in double") {
    Rng rng(22);
    for (std::size_t cols : {1, 8, 9, 130}) {
      const std::size_t rows = 11;
      const auto xd = testing::random_values(rng, rows * cols);
      std::vector<float> fast(xd.begin(), xd.end()), ref = fast;
      const std::vector<float> x = fast;
      std::vector<double> fast_sums(rows), ref_sums(rows);
      kernels::omp::exp_affine_rows(fast.data(), rows, cols, 2.0, -2.0, fast_sums.data());
      kernels::serial::exp_affine_rows(ref.data(), rows, cols, 2.0, -2.0, ref_sums.data());
      for (std::size_t r = 0; r < rows; ++r) {
        double exact_sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          const std::size_t i = r * cols + j;
          const double exact = std::exp(2.0 * double(x[i]) - 2.0);
          exact_sum += exact;
          CHECK(std::abs(fast[i] - exact) <= 0.5001 * std::numeric_limits<float>::epsilon() * exact);
          CHECK(std::abs(ref[i] - exact) <= 0.5001 * std::numeric_limits<float>::epsilon() * exact);
        }
        CHECK(fast_sums[r] == doctest::Approx(exact_sum).epsilon(1e-7));
        CHECK(ref_sums[r] == doctest::Approx(exact_sum).epsilon(1e-7));
      }
    }
  }

#ifdef _OPENMP
  TEST_CASE("results are bitwise identical for any thread count") {
    Rng rng(8);
    const std::size_t m = 300, n = 200, k = 150;
    const auto a = testing::random_values(rng, m * k);
    const auto b = testing::random_values(rng, k * n);
    const auto s = random_csr(rng, 500, 300, 0.05);
    const auto dense = testing::random_values(rng, 300 * 33);
    const int saved = omp_get_max_threads();
    const std::vector<float> af(a.begin(), a.end()), bf(b.begin(), b.end());
    std::vector<std::vector<double>> gemm_out, gemm_tn_out, spmm_out, exp_out;
    std::vector<std::vector<float>> gemm_f32_out;
    for (int threads : {1, 3, 8}) {
      omp_set_num_threads(threads);
      std::vector<double> c(m * n), c_tn(k * n), d(500 * 33);
      kernels::omp::gemm(Trans::no, Trans::no, m, n, k, a.data(), k, b.data(), n, 0.0, c.data(), n);
      kernels::omp::gemm(Trans::yes, Trans::no, k, n, m, a.data(), k, c.data(), n, 0.0, c_tn.data(), n);
      kernels::omp::spmm(s, dense.data(), 33, d.data());
      auto e = a;
      std::vector<double> sums(m);
      kernels::omp::exp_affine_rows(e.data(), m, k, 1.0, 0.0, sums.data());
      e.insert(e.end(), sums.begin(), sums.end());
      std::vector<float> cf(m * n);
      kernels::omp::gemm(Trans::no, Trans::no, m, n, k, af.data(), k, bf.data(), n, 0.0f, cf.data(), n);
      gemm_f32_out.push_back(cf);
      gemm_out.push_back(c);
      gemm_tn_out.push_back(c_tn);
      spmm_out.push_back(d);
      exp_out.push_back(e);
    }
    omp_set_num_threads(saved);
    for (std::size_t t = 1; t < 3; ++t) {
      CHECK(gemm_out[0] == gemm_out[t]);
      CHECK(gemm_tn_out[0] == gemm_tn_out[t]);
      CHECK(gemm_f32_out[0] == gemm_f32_out[t]);
      CHECK(spmm_out[0] == spmm_out[t]);
      CHECK(exp_out[0] == exp_out[t]);
    }
  }
#endif
}
