#pragma once

#include <cstddef>

#include "muse/model.hpp"
#include "muse/tensor.hpp"

namespace muse {

// Storage of the N x N similarity matrices inside view_loss. f32 is a
// training speed mode; reductions, logs and the returned gradients stay double.
enum class Precision { f64, f32 };

struct ContrastConfig {
  double tau = 0.5;
  double beta1 = 1.0;  // contextual term weight
  double beta2 = 1.0;  // fusion term weight
  // Ablation switches; a disabled term contributes nothing.
  bool semantic = true;
  bool contextual = true;
  bool fusion = true;
  Precision precision = Precision::f64;

  void validate() const;
};

struct ControllerConfig {
  double alpha1 = 100.0;  // weight of ||lambda||_2
  double alpha2 = 1.0;    // weight of |mean(lambda) - epsilon|
  double epsilon = 0.5;

  void validate() const;
};

// NT-Xent loss of anchor row i of z against its positive z_aug[i]:
//   -log( e^{c(z_i, z~_i)/tau} / (sum_{j != i} e^{c(z_i, z_j)/tau} + sum_j e^{c(z_i, z~_j)/tau}) )
// where c is cosine similarity. Value only.
double ntxent_pair_loss(const Tensor& z, const Tensor& z_aug, std::size_t i, double tau);

// Symmetrised view loss (1/2N) sum_i [l(z_i, z~_i) + l(z~_i, z_i)], the
// second term mirroring the first with the views' roles swapped.
// Differentiable in z and z_aug. Memory is O(N^2).
Tensor view_loss(const Tensor& z, const Tensor& z_aug, double tau, Precision precision = Precision::f64);

struct ContrastTerms {
  Tensor total;
  double semantic = 0.0;
  double contextual = 0.0;
  double fusion = 0.0;
};

// L_s + beta1 L_c + beta2 L_f on projected embeddings. The fusion pair must
// have been built with a constant lambda.
ContrastTerms contrast_loss_terms(const EmbeddingSet& e, const ModelParams& p, const ContrastConfig& cfg);
Tensor contrast_loss(const EmbeddingSet& e, const ModelParams& p, const ContrastConfig& cfg);

// sum_i lambda_i cos(h_s_i, h_c_i) + alpha1 ||lambda||_2 + alpha2 |mean(lambda) - epsilon|
// with h_s and h_c treated as constants.
Tensor controller_loss(const Tensor& lambda, const Tensor& h_s, const Tensor& h_c, const ControllerConfig& cfg);

}  // namespace muse
