#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "muse/kernels.hpp"
#include "muse/tensor.hpp"

namespace muse {

// Constant sparse matrix with its transpose precomputed for the backward pass.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(kernels::CsrMatrix m);

  std::size_t rows() const { return data_ ? data_->forward.rows : 0; }
  std::size_t cols() const { return data_ ? data_->forward.cols : 0; }
  std::size_t nnz() const { return data_ ? data_->forward.nnz() : 0; }
  const kernels::CsrMatrix& csr() const { return data_->forward; }
  const kernels::CsrMatrix& csr_transposed() const { return data_->transposed; }
  Tensor to_dense() const;

 private:
  struct Data {
    kernels::CsrMatrix forward;
    kernels::CsrMatrix transposed;
  };
  std::shared_ptr<const Data> data_;
};

// Binary ops accept equal shapes, or a 1 x cols right operand broadcast over rows.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor relu(const Tensor& a);  // derivative at exactly 0 is 0
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // DomainError on non-positive input
Tensor sigmoid(const Tensor& a);
Tensor sqrt(const Tensor& a);  // DomainError on negative input
Tensor abs(const Tensor& a);   // derivative at 0 is 0

Tensor sum(const Tensor& a);   // 1 x 1
Tensor mean(const Tensor& a);  // 1 x 1

// Row i scaled by weights(i, 0); weights is rows x 1.
Tensor scale_rows(const Tensor& a, const Tensor& weights);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Row-wise cosine similarity, rows x 1. Rows where either norm is below
// kCosineEps give 0 with zero gradient.
inline constexpr double kCosineEps = 1e-12;
Tensor cosine_rows(const Tensor& a, const Tensor& b);

// S * x for a constant sparse S.
Tensor spmm(const SparseMatrix& s, const Tensor& x);

// Mean softmax cross-entropy of logits (n x C) against integer targets.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets);

}  // namespace muse
