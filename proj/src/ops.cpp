#include "muse/ops.hpp"

#include <cmath>
#include <string>

#include "muse/errors.hpp"

namespace muse {
namespace {

enum class Broadcast { none, row };

Broadcast check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

// Sums a rows x cols gradient down to the 1 x cols operand.
void accumulate_broadcast(std::span<double> dst, std::span<const double> src, std::size_t rows,
                          std::size_t cols, double sign) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c] += sign * src[r * cols + c];
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward f, Derivative df) {
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(a.rows(), a.cols(), std::move(out), {a},
                             [a, df](const detail::Node& self) {
                               auto g = a.grad_accumulator();
                               auto x = a.data();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] += self.grad[i] * df(x[i], self.value[i]);
                               }
                             });
}

}  // namespace

SparseMatrix::SparseMatrix(kernels::CsrMatrix m) {
  auto d = std::make_shared<Data>();
  d->transposed = m.transposed();
  d->forward = std::move(m);
  data_ = std::move(d);
}

Tensor SparseMatrix::to_dense() const {
  Tensor t = Tensor::zeros(rows(), cols());
  auto out = t.mutable_data();
  const auto& m = csr();
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p) out[r * m.cols + m.col_idx[p]] += m.values[p];
  }
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + a.shape_string() + " x " + b.shape_string());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm(kernels::Trans::no, kernels::Trans::no, m, n, k, a.data().data(), k, b.data().data(), n,
                0.0, out.data(), n);
  return Tensor::make_result(m, n, std::move(out), {a, b}, [a, b, m, n, k](const detail::Node& self) {
    if (a.requires_grad()) {
      kernels::gemm(kernels::Trans::no, kernels::Trans::yes, m, k, n, self.grad.data(), n, b.data().data(),
                    n, 1.0, a.grad_accumulator().data(), k);
    }
    if (b.requires_grad()) {
      kernels::gemm(kernels::Trans::yes, kernels::Trans::no, k, n, m, a.data().data(), k, self.grad.data(),
                    n, 1.0, b.grad_accumulator().data(), n);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary("add", a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + (mode == Broadcast::row ? y[i % cols] : y[i]);
  return Tensor::make_result(rows, cols, std::move(out), {a, b}, [a, b, mode, rows, cols](const detail::Node& self) {
    if (a.requires_grad()) {
      auto g = a.grad_accumulator();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad()) {
      auto g = b.grad_accumulator();
      if (mode == Broadcast::row) {
        accumulate_broadcast(g, self.grad, rows, cols, 1.0);
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary("sub", a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - (mode == Broadcast::row ? y[i % cols] : y[i]);
  return Tensor::make_result(rows, cols, std::move(out), {a, b}, [a, b, mode, rows, cols](const detail::Node& self) {
    if (a.requires_grad()) {
      auto g = a.grad_accumulator();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad()) {
      auto g = b.grad_accumulator();
      if (mode == Broadcast::row) {
        accumulate_broadcast(g, self.grad, rows, cols, -1.0);
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary("mul", a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * (mode == Broadcast::row ? y[i % cols] : y[i]);
  return Tensor::make_result(rows, cols, std::move(out), {a, b}, [a, b, mode, rows, cols](const detail::Node& self) {
    auto x = a.data();
    auto y = b.data();
    if (a.requires_grad()) {
      auto g = a.grad_accumulator();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (mode == Broadcast::row ? y[i % cols] : y[i]);
    }
    if (b.requires_grad()) {
      auto g = b.grad_accumulator();
      for (std::size_t i = 0; i < rows * cols; ++i) {
        g[mode == Broadcast::row ? i % cols : i] += self.grad[i] * x[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x <= 0.0 ? 0.0 : x; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.data()) {
    if (x < 0.0) throw DomainError("sqrt: negative input " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  return Tensor::make_result(1, 1, {total}, {a}, [a](const detail::Node& self) {
    auto g = a.grad_accumulator();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor scale_rows(const Tensor& a, const Tensor& weights) {
  if (weights.rows() != a.rows() || weights.cols() != 1) {
    throw ShapeError("scale_rows: weights " + weights.shape_string() + " do not match rows of " + a.shape_string());
  }
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  auto w = weights.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = w[r] * x[r * cols + c];
  }
  return Tensor::make_result(rows, cols, std::move(out), {a, weights}, [a, weights, rows, cols](const detail::Node& self) {
    auto x = a.data();
    auto w = weights.data();
    if (a.requires_grad()) {
      auto g = a.grad_accumulator();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c] * w[r];
      }
    }
    if (weights.requires_grad()) {
      auto g = weights.grad_accumulator();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += self.grad[r * cols + c] * x[r * cols + c];
        g[r] += acc;
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch " + parts.front().shape_string() + " vs " + p.shape_string());
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto d = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out[r * cols + offset + c] = d[r * p.cols() + c];
    }
    offset += p.cols();
  }
  return Tensor::make_result(rows, cols, std::move(out), parts, [parts, rows, cols](const detail::Node& self) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) {
        auto g = p.grad_accumulator();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < p.cols(); ++c) g[r * p.cols() + c] += self.grad[r * cols + offset + c];
        }
      }
      offset += p.cols();
    }
  });
}

Tensor cosine_rows(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("cosine_rows: shapes differ " + a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(rows), norm_a(rows), norm_b(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dot += x[r * cols + c] * y[r * cols + c];
      na += x[r * cols + c] * x[r * cols + c];
      nb += y[r * cols + c] * y[r * cols + c];
    }
    norm_a[r] = std::sqrt(na);
    norm_b[r] = std::sqrt(nb);
    out[r] = (norm_a[r] < kCosineEps || norm_b[r] < kCosineEps) ? 0.0 : dot / (norm_a[r] * norm_b[r]);
  }
  return Tensor::make_result(rows, 1, std::move(out), {a, b},
                             [a, b, rows, cols, norm_a, norm_b](const detail::Node& self) {
    auto x = a.data();
    auto y = b.data();
    for (std::size_t r = 0; r < rows; ++r) {
      if (norm_a[r] < kCosineEps || norm_b[r] < kCosineEps) continue;
      const double g = self.grad[r];
      const double s = self.value[r];
      const double inv = 1.0 / (norm_a[r] * norm_b[r]);
      if (a.requires_grad()) {
        auto ga = a.grad_accumulator();
        const double k = s / (norm_a[r] * norm_a[r]);
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g * (y[r * cols + c] * inv - k * x[r * cols + c]);
      }
      if (b.requires_grad()) {
        auto gb = b.grad_accumulator();
        const double k = s / (norm_b[r] * norm_b[r]);
        for (std::size_t c = 0; c < cols; ++c) gb[r * cols + c] += g * (x[r * cols + c] * inv - k * y[r * cols + c]);
      }
    }
  });
}

Tensor spmm(const SparseMatrix& s, const Tensor& x) {
  if (s.cols() != x.rows()) {
    throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     " cannot multiply " + x.shape_string());
  }
  const std::size_t n = x.cols();
  std::vector<double> out(s.rows() * n);
  kernels::spmm(s.csr(), x.data().data(), n, out.data());
  return Tensor::make_result(s.rows(), n, std::move(out), {x}, [s, x, n](const detail::Node& self) {
    std::vector<double> tmp(s.cols() * n);
    kernels::spmm(s.csr_transposed(), self.grad.data(), n, tmp.data());
    auto g = x.grad_accumulator();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += tmp[i];
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     logits.shape_string());
  }
  if (rows == 0) throw ContractError("softmax_cross_entropy: empty batch");
  auto z = logits.data();
  std::vector<double> probs(rows * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw ContractError("softmax_cross_entropy: target " + std::to_string(t) + " out of range");
    }
    double mx = z[r * classes];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z[r * classes + c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(z[r * classes + c] - mx);
      denom += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= denom;
    total += -(z[r * classes + t] - mx - std::log(denom));
  }
  std::vector<int> labels(targets.begin(), targets.end());
  return Tensor::make_result(1, 1, {total / static_cast<double>(rows)}, {logits},
                             [logits, probs = std::move(probs), labels = std::move(labels), rows,
                              classes](const detail::Node& self) {
    auto g = logits.grad_accumulator();
    const double scale_factor = self.grad[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double indicator = static_cast<int>(c) == labels[r] ? 1.0 : 0.0;
        g[r * classes + c] += scale_factor * (probs[r * classes + c] - indicator);
      }
    }
  });
}

}  // namespace muse
