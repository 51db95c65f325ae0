#include "muse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "muse/adam.hpp"
#include "muse/errors.hpp"
#include "muse/ops.hpp"

namespace muse {

void mean_std(std::span<const double> values, double& mean, double& std) {
  mean = 0.0;
  std = 0.0;
  if (values.empty()) return;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  std = std::sqrt(var / static_cast<double>(values.size()));
}

// ---------------------------------------------------------------------------
// Linear probe

namespace {

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t cols = x.cols();
  const auto src = x.data();
  std::vector<double> out(idx.size() * cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= x.rows()) throw ContractError("row index " + std::to_string(idx[r]) + " out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[r] * cols), cols, out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  return Tensor::from(idx.size(), cols, std::move(out));
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  const auto z = logits.data();
  const std::size_t c = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = z.subspan(r * c, c);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace

LinearProbe fit_linear_probe(const Tensor& embeddings, std::span<const std::size_t> train_idx,
                             std::span<const int> train_labels, std::span<const std::size_t> val_idx,
                             std::span<const int> val_labels, std::size_t n_classes, const ProbeConfig& cfg) {
  if (train_idx.size() != train_labels.size() || val_idx.size() != val_labels.size()) {
    throw ContractError("linear probe: index and label counts differ");
  }
  if (train_idx.empty()) throw ContractError("linear probe: empty training set");
  if (std::set<int>(train_labels.begin(), train_labels.end()).size() < 2) {
    throw ContractError("linear probe: training set contains a single class");
  }
  const Tensor x_train = gather_rows(embeddings.detach(), train_idx);
  const Tensor x_val = gather_rows(embeddings.detach(), val_idx);

  LinearProbe probe{Tensor::zeros(embeddings.cols(), n_classes, true), Tensor::zeros(1, n_classes, true)};
  std::vector<Tensor> params{probe.weight, probe.bias};
  AdamState state = AdamState::for_params(params);
  const AdamConfig adam{cfg.lr};

  LinearProbe best{probe.weight.clone(), probe.bias.clone()};
  double best_val = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tensor loss = softmax_cross_entropy(add(matmul(x_train, probe.weight), probe.bias), train_labels);
    if (cfg.weight_decay > 0.0) loss = add(loss, scale(sum(mul(probe.weight, probe.weight)), 0.5 * cfg.weight_decay));
    for (auto& p : params) p.zero_grad();
    backward(loss);
    adam_step(params, state, adam);

    double val_acc = 0.0;
    if (!val_idx.empty()) {
      const auto pred = argmax_rows(add(matmul(x_val, probe.weight.detach()), probe.bias.detach()));
      val_acc = accuracy(pred, val_labels);
    }
    if (val_acc > best_val) {
      best_val = val_acc;
      best = {probe.weight.clone(), probe.bias.clone()};
    }
  }
  best.weight.set_requires_grad(false);
  best.bias.set_requires_grad(false);
  return best;
}

std::vector<int> predict(const LinearProbe& probe, const Tensor& embeddings, std::span<const std::size_t> idx) {
  return argmax_rows(add(matmul(gather_rows(embeddings.detach(), idx), probe.weight.detach()), probe.bias.detach()));
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ContractError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

ClassificationResult linear_probe(const Tensor& embeddings, std::span<const int> labels, std::size_t n_classes,
                                  std::span<const Split> splits, const ProbeConfig& cfg) {
  if (labels.size() != embeddings.rows()) throw ContractError("linear probe: label count differs from embedding rows");
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
  };
  ClassificationResult result;
  for (const auto& split : splits) {
    const LinearProbe probe =
        fit_linear_probe(embeddings, split.train, pick(split.train), split.val, pick(split.val), n_classes, cfg);
    result.accuracies.push_back(accuracy(predict(probe, embeddings, split.test), pick(split.test)));
  }
  mean_std(result.accuracies, result.mean, result.std);
  return result;
}

// ---------------------------------------------------------------------------
// Clustering metrics

namespace {

struct Contingency {
  std::vector<std::vector<double>> table;  // pred cluster x true class
  std::vector<double> pred_totals;
  std::vector<double> truth_totals;
  double n = 0.0;
};

std::vector<int> compact(std::span<const int> labels, std::size_t& count) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  count = ids.size();
  return out;
}

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("labelings differ in length: " + std::to_string(pred.size()) + " vs " +
                        std::to_string(truth.size()));
  }
  std::size_t kp = 0, kt = 0;
  const auto p = compact(pred, kp);
  const auto t = compact(truth, kt);
  Contingency c;
  c.table.assign(kp, std::vector<double>(kt, 0.0));
  c.pred_totals.assign(kp, 0.0);
  c.truth_totals.assign(kt, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    c.table[p[i]][t[i]] += 1.0;
    c.pred_totals[p[i]] += 1.0;
    c.truth_totals[t[i]] += 1.0;
  }
  c.n = static_cast<double>(p.size());
  return c;
}

double entropy(const std::vector<double>& totals, double n) {
  double h = 0.0;
  for (double c : totals) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

double pairs(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw ContractError("hungarian_min_cost: cost matrix must be square");
  }
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation with 1-based rows/columns; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n == 0.0) return 0.0;
  const std::size_t size = std::max(c.pred_totals.size(), c.truth_totals.size());
  double biggest = 0.0;
  for (const auto& row : c.table) {
    for (double x : row) biggest = std::max(biggest, x);
  }
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, biggest));
  for (std::size_t i = 0; i < c.table.size(); ++i) {
    for (std::size_t j = 0; j < c.table[i].size(); ++j) cost[i][j] = biggest - c.table[i][j];
  }
  const auto assignment = hungarian_min_cost(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < c.table.size(); ++i) {
    if (assignment[i] < c.truth_totals.size()) matched += c.table[i][assignment[i]];
  }
  return matched / c.n;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n == 0.0) return 0.0;
  const double hp = entropy(c.pred_totals, c.n);
  const double ht = entropy(c.truth_totals, c.n);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.table.size(); ++i) {
    for (std::size_t j = 0; j < c.table[i].size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (c.pred_totals[i] * c.truth_totals[j]));
    }
  }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  double index = 0.0, sum_pred = 0.0, sum_truth = 0.0;
  for (const auto& row : c.table) {
    for (double x : row) index += pairs(x);
  }
  for (double x : c.pred_totals) sum_pred += pairs(x);
  for (double x : c.truth_totals) sum_truth += pairs(x);
  const double total_pairs = pairs(c.n);
  if (total_pairs == 0.0) return 1.0;
  const double expected = sum_pred * sum_truth / total_pairs;
  const double max_index = 0.5 * (sum_pred + sum_truth);
  // Both labelings all-singletons or both a single cluster.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ClusteringResult evaluate_clustering(const Tensor& embeddings, std::span<const int> labels, std::size_t n_classes,
                                     std::uint64_t seed) {
  ClusteringResult r;
  r.assignment = kmeans(embeddings, n_classes, seed).assignment;
  r.acc = clustering_accuracy(r.assignment, labels);
  r.nmi = nmi(r.assignment, labels);
  r.ari = ari(r.assignment, labels);
  return r;
}

}  // namespace muse
