#include "muse/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "muse/errors.hpp"

namespace muse {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(lr_controller > 0.0)) throw ContractError("learning rates must be positive");
  if (epochs < 1) throw ContractError("epochs must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("dropout must lie in [0, 1)");
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
    throw ContractError("fixed_lambda must lie in [0, 1]");
  }
  contrast.validate();
  controller.validate();
  augment.validate();
}

namespace {

void lambda_stats(const Tensor& lambda, double& mean_out, double& std_out) {
  const auto v = lambda.data();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  mean_out = mean;
  std_out = std::sqrt(var / static_cast<double>(v.size()));
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

ModelDims dims_for(const Graph& g, ModelDims dims) {
  dims.in_features = g.n_features();
  return dims;
}

}  // namespace

Trainer::Trainer(Graph graph, TrainConfig cfg)
    : graph_(std::move(graph)),
      cfg_(std::move(cfg)),
      dropout_rng_(0),
      augment_rng_(cfg_.augment.seed) {
  cfg_.validate();
  if (graph_.n_nodes() < 2) throw ContractError("training needs at least 2 nodes");
  Rng init(cfg_.seed);
  params_ = ModelParams::init(dims_for(graph_, cfg_.dims), init);
  dropout_rng_ = init.fork();
  adj_hat_ = normalized_adjacency_sparse(graph_, true);
  degree_feat_ = degree_feature(graph_.degree());
  rep_params_ = params_.representation_params();
  ctrl_params_ = params_.controller_params();
  rep_state_ = AdamState::for_params(rep_params_);
  ctrl_state_ = AdamState::for_params(ctrl_params_);
}

void Trainer::contrast_step() {
  const Tensor& x = graph_.features();
  const Tensor x_aug = mask_features(x, cfg_.augment.p_s, augment_rng_);
  const Graph g_aug = drop_edges(graph_, cfg_.augment.p_c, augment_rng_);
  const SparseMatrix adj_aug = normalized_adjacency_sparse(g_aug, true);
  const Dropout drop{cfg_.dropout, &dropout_rng_};

  EmbeddingSet e;
  e.h_s = encode_semantic(params_, x, drop);
  e.h_s_aug = encode_semantic(params_, x_aug, drop);
  e.h_c = encode_contextual(params_, x, adj_hat_, drop);
  e.h_c_aug = encode_contextual(params_, x, adj_aug, drop);

  const Tensor lambda = cfg_.fixed_lambda
                            ? Tensor::filled(graph_.n_nodes(), 1, *cfg_.fixed_lambda)
                            : controller_lambda(params_, e.h_s, e.h_c, degree_feat_).detach();
  e.h_f = fuse(e.h_s, e.h_c, lambda);
  e.h_f_aug = fuse(e.h_s_aug, e.h_c_aug, lambda);

  ContrastTerms terms = contrast_loss_terms(e, params_, cfg_.contrast);
  const double value = terms.total.item();
  if (!std::isfinite(value)) throw NonFiniteLoss(epoch_ + 1, "contrast");

  zero_grads(rep_params_);
  zero_grads(ctrl_params_);
  backward(terms.total);
  adam_step(rep_params_, rep_state_, AdamConfig{cfg_.lr});
  zero_grads(rep_params_);

  current_.contrast_loss = value;
  current_.semantic_loss = terms.semantic;
  current_.contextual_loss = terms.contextual;
  current_.fusion_loss = terms.fusion;
}

void Trainer::controller_step() {
  if (cfg_.fixed_lambda) {
    current_.controller_loss = 0.0;
    current_.lambda_mean = *cfg_.fixed_lambda;
    current_.lambda_std = 0.0;
    return;
  }
  const Tensor& x = graph_.features();
  const Tensor h_s = encode_semantic(params_, x).detach();
  const Tensor h_c = encode_contextual(params_, x, adj_hat_).detach();
  const Tensor lambda = controller_lambda(params_, h_s, h_c, degree_feat_);
  const Tensor loss = controller_loss(lambda, h_s, h_c, cfg_.controller);
  const double value = loss.item();
  if (!std::isfinite(value)) throw NonFiniteLoss(epoch_ + 1, "controller");
  lambda_stats(lambda, current_.lambda_mean, current_.lambda_std);

  zero_grads(ctrl_params_);
  backward(loss);
  adam_step(ctrl_params_, ctrl_state_, AdamConfig{cfg_.lr_controller});
  zero_grads(ctrl_params_);
  current_.controller_loss = value;
}

EpochRecord Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  current_ = EpochRecord{};
  contrast_step();
  controller_step();
  ++epoch_;
  current_.epoch = epoch_;
  current_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return current_;
}

TrainReport train(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Trainer trainer(g, cfg);
  TrainReport report;
  report.fixed_lambda = cfg.fixed_lambda;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochRecord rec = trainer.run_epoch();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.contrast_loss < best) {
      best = rec.contrast_loss;
      best_epoch = rec.epoch;
    }
    if (cfg.patience > 0 && rec.epoch - best_epoch >= cfg.patience) {
      report.stopped_early = rec.epoch < cfg.epochs;
      break;
    }
  }
  report.params = trainer.params().clone();
  return report;
}

Tensor inference_lambda(const Graph& g, const ModelParams& params, std::optional<double> fixed_lambda) {
  if (fixed_lambda) return Tensor::filled(g.n_nodes(), 1, *fixed_lambda);
  const Tensor& x = g.features();
  const Tensor h_s = encode_semantic(params, x).detach();
  const Tensor h_c = encode_contextual(params, x, normalized_adjacency_sparse(g, true)).detach();
  return controller_lambda(params, h_s, h_c, g.degree()).detach();
}

Tensor embed(const Graph& g, const ModelParams& params, std::optional<double> fixed_lambda) {
  if (g.n_features() != params.dims.in_features) {
    throw ShapeError("embed: graph has " + std::to_string(g.n_features()) + " features, model expects " +
                     std::to_string(params.dims.in_features));
  }
  const Tensor& x = g.features();
  const Tensor h_s = encode_semantic(params, x).detach();
  const Tensor h_c = encode_contextual(params, x, normalized_adjacency_sparse(g, true)).detach();
  const Tensor lambda = fixed_lambda ? Tensor::filled(g.n_nodes(), 1, *fixed_lambda)
                                     : controller_lambda(params, h_s, h_c, g.degree()).detach();
  return fuse(h_s, h_c, lambda).detach();
}

}  // namespace muse
