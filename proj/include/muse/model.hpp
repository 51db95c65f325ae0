#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "muse/ops.hpp"
#include "muse/random.hpp"
#include "muse/tensor.hpp"

namespace muse {

struct ModelDims {
  std::size_t in_features = 0;  // F
  std::size_t embed = 64;       // F', encoder hidden and output width
  std::size_t project = 64;     // F_p
  std::size_t filter = 30;      // F_g, also the controller hidden width
};

// All trainable matrices. Encoder (no bias) and projector form the
// representation group; filters and the lambda MLP form the controller group.
struct ModelParams {
  ModelDims dims;

  Tensor enc_w1;  // F x F'
  Tensor enc_w2;  // F' x F'

  Tensor proj_w1;  // F' x F_p
  Tensor proj_b1;  // 1 x F_p
  Tensor proj_w2;  // F_p x F_p
  Tensor proj_b2;  // 1 x F_p

  Tensor filter_s_w;  // F' x F_g
  Tensor filter_s_b;  // 1 x F_g
  Tensor filter_c_w;  // F' x F_g
  Tensor filter_c_b;  // 1 x F_g
  Tensor ctrl_w1;     // (2 F_g + 1) x F_g
  Tensor ctrl_b1;     // 1 x F_g
  Tensor ctrl_w2;     // F_g x 1
  Tensor ctrl_b2;     // 1 x 1

  // Glorot-uniform weights, zero biases.
  static ModelParams init(const ModelDims& dims, Rng& rng);

  std::vector<Tensor> representation_params() const;
  std::vector<Tensor> controller_params() const;
  std::vector<std::pair<std::string, Tensor>> named() const;
  // Deep copy (independent storage).
  ModelParams clone() const;
};

// Inverted dropout on hidden activations; inactive when rng is null or rate is 0.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

Tensor apply_dropout(const Tensor& h, const Dropout& dropout);

// relu(X W1) W2: the shared encoder with the identity as adjacency.
Tensor encode_semantic(const ModelParams& p, const Tensor& x, const Dropout& dropout = {});

// A relu(A X W1) W2 with the same weights as encode_semantic.
Tensor encode_contextual(const ModelParams& p, const Tensor& x, const SparseMatrix& adj_hat,
                         const Dropout& dropout = {});
Tensor encode_contextual(const ModelParams& p, const Tensor& x, const Tensor& adj_hat,
                         const Dropout& dropout = {});

// relu(h P1 + b1) P2 + b2.
Tensor project(const ModelParams& p, const Tensor& h);

// log(1 + d) standardised to zero mean and unit variance, N x 1. A constant
// degree sequence maps to zeros.
Tensor degree_feature(std::span<const std::size_t> degree);

// Per-node fusion weight lambda (N x 1, each in (0, 1)). h_s, h_c and the
// degree feature are detached, so gradients reach only the controller group.
Tensor controller_lambda(const ModelParams& p, const Tensor& h_s, const Tensor& h_c,
                         const Tensor& degree_feat);
Tensor controller_lambda(const ModelParams& p, const Tensor& h_s, const Tensor& h_c,
                         std::span<const std::size_t> degree);

// Row i = h_s[i] + lambda[i] * h_c[i].
Tensor fuse(const Tensor& h_s, const Tensor& h_c, const Tensor& lambda);

// The six representations of one training step.
struct EmbeddingSet {
  Tensor h_s, h_s_aug;
  Tensor h_c, h_c_aug;
  Tensor h_f, h_f_aug;
};

// ---------------------------------------------------------------------------
// Checkpoint file (text, see README "Checkpoint format").

struct Checkpoint {
  ModelParams params;
  std::optional<double> fixed_lambda;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace muse
