#pragma once

#include <cstdint>
#include <vector>

#include "muse/graph.hpp"
#include "muse/random.hpp"
#include "muse/tensor.hpp"

namespace muse {

struct AugmentConfig {
  double p_s = 0.3;  // feature-column mask probability
  double p_c = 0.3;  // edge drop probability
  std::uint64_t seed = 0;

  void validate() const;
};

// Draws one column mask m (P(m_j = 1) = 1 - p_s) and returns x with every row
// multiplied by m. The result is a constant.
Tensor mask_features(const Tensor& x, double p_s, Rng& rng);

// The 0/1 column mask used by mask_features for the same stream state.
std::vector<double> draw_feature_mask(std::size_t n_features, double p_s, Rng& rng);

// Keeps each undirected edge independently with probability 1 - p_c.
Graph drop_edges(const Graph& g, double p_c, Rng& rng);

}  // namespace muse
