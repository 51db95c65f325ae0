#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "muse/graph.hpp"
#include "muse/random.hpp"
#include "muse/tensor.hpp"

namespace muse::testing {

// Labelled random graph: each class has a prototype feature vector, nodes
// are prototype + uniform noise, and each edge joins two nodes of the same
// class with probability `homophily`.
inline Graph synthetic_graph(std::size_t n, std::size_t n_edges, std::size_t n_features, std::size_t n_classes,
                             std::uint64_t seed, double homophily = 0.2, double noise = 1.0) {
  Rng rng(seed);
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.index(n_classes));
  std::vector<double> proto(n_classes * n_features);
  for (auto& p : proto) p = rng.uniform(-1.0, 1.0);
  std::vector<double> x(n * n_features);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) {
      x[i * n_features + j] = proto[static_cast<std::size_t>(labels[i]) * n_features + j] + noise * rng.uniform(-1.0, 1.0);
    }
  }
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  const std::size_t max_edges = n * (n - 1) / 2;
  n_edges = std::min(n_edges, max_edges);
  while (edges.size() < n_edges) {
    const std::size_t u = rng.index(n);
    std::size_t v;
    const auto& same = by_class[static_cast<std::size_t>(labels[u])];
    if (rng.bernoulli(homophily) && same.size() > 1) {
      v = same[rng.index(same.size())];
    } else {
      v = rng.index(n);
    }
    if (u == v) continue;
    const auto key = std::minmax(u, v);
    if (seen.insert(key).second) edges.emplace_back(key.first, key.second);
  }
  return Graph::build("synthetic", n, edges, Tensor::from(n, n_features, std::move(x)), labels, n_classes);
}

inline std::vector<double> random_values(Rng& rng, std::size_t count, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Owning copy; ranging over data() of a temporary Tensor would dangle.
inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, bool requires_grad = false) {
  return Tensor::from(rows, cols, random_values(rng, rows * cols), requires_grad);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("muse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace muse::testing

#include <functional>

#include "muse/ops.hpp"
#include "oracles.hpp"

namespace muse::testing {

// Largest relative error between backprop and central differences over every
// entry of every input. `f` must build a fresh graph from `inputs` each call.
inline double max_gradient_error(std::vector<Tensor>& inputs, const std::function<Tensor()>& f, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  backward(f());
  double worst = 0.0;
  for (auto& t : inputs) {
    const auto analytic = t.grad();
    const auto numeric = oracle::numeric_gradient(t, [&] { return f().item(); }, h);
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      worst = std::max(worst, oracle::relative_error(analytic[k], numeric[k]));
    }
  }
  return worst;
}

}  // namespace muse::testing
