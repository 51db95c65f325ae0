#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "muse/adam.hpp"
#include "muse/augment.hpp"
#include "muse/graph.hpp"
#include "muse/losses.hpp"
#include "muse/model.hpp"

namespace muse {

struct TrainConfig {
  double lr = 1e-3;             // encoder + projector
  double lr_controller = 1e-3;  // filters + lambda MLP
  std::size_t epochs = 500;
  std::size_t patience = 50;  // stop after this many epochs without a new best contrast loss; 0 = never
  double dropout = 0.2;
  std::uint64_t seed = 0;
  ContrastConfig contrast;
  ControllerConfig controller;
  AugmentConfig augment;
  ModelDims dims;  // in_features is taken from the graph
  // When set, lambda is this constant for every node and the controller is never trained.
  std::optional<double> fixed_lambda;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double contrast_loss = 0.0;
  double semantic_loss = 0.0;
  double contextual_loss = 0.0;
  double fusion_loss = 0.0;
  double controller_loss = 0.0;
  double lambda_mean = 0.0;
  double lambda_std = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  ModelParams params;
  std::optional<double> fixed_lambda;
  bool stopped_early = false;
};

// Alternating optimisation. Each epoch draws fresh augmentations, takes one
// Adam step on the representation group against the contrast loss (lambda
// held constant), then one Adam step on the controller group against the
// controller loss (embeddings held constant).
class Trainer {
 public:
  Trainer(Graph graph, TrainConfig cfg);

  // Phase 1: augment, encode, fuse with the current lambda, update encoder + projector.
  void contrast_step();
  // Phase 2: re-encode with the updated encoder, update the controller.
  void controller_step();
  // Both phases plus bookkeeping.
  EpochRecord run_epoch();

  const ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epochs_run() const { return epoch_; }

 private:
  Graph graph_;
  TrainConfig cfg_;
  ModelParams params_;
  Rng dropout_rng_;
  Rng augment_rng_;
  SparseMatrix adj_hat_;
  Tensor degree_feat_;
  std::vector<Tensor> rep_params_;
  std::vector<Tensor> ctrl_params_;
  AdamState rep_state_;
  AdamState ctrl_state_;
  std::size_t epoch_ = 0;
  EpochRecord current_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainReport train(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Per-node lambda on the unperturbed graph (or the fixed constant).
Tensor inference_lambda(const Graph& g, const ModelParams& params, std::optional<double> fixed_lambda = {});

// Frozen fused representations H_s + lambda * H_c, no augmentation or dropout.
Tensor embed(const Graph& g, const ModelParams& params, std::optional<double> fixed_lambda = {});

}  // namespace muse
