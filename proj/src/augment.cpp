#include "muse/augment.hpp"

#include <string>

#include "muse/errors.hpp"

namespace muse {
namespace {

void check_probability(const char* name, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError(std::string(name) + " must lie in [0, 1), got " + std::to_string(p));
}

}  // namespace

void AugmentConfig::validate() const {
  check_probability("p_s", p_s);
  check_probability("p_c", p_c);
}

std::vector<double> draw_feature_mask(std::size_t n_features, double p_s, Rng& rng) {
  check_probability("p_s", p_s);
  std::vector<double> mask(n_features);
  for (auto& m : mask) m = rng.bernoulli(1.0 - p_s) ? 1.0 : 0.0;
  return mask;
}

Tensor mask_features(const Tensor& x, double p_s, Rng& rng) {
  const auto mask = draw_feature_mask(x.cols(), p_s, rng);
  const std::size_t rows = x.rows(), cols = x.cols();
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = src[r * cols + c] * mask[c];
  }
  return Tensor::from(rows, cols, std::move(out));
}

Graph drop_edges(const Graph& g, double p_c, Rng& rng) {
  check_probability("p_c", p_c);
  std::vector<Edge> kept;
  kept.reserve(g.n_edges());
  for (const auto& e : g.edges()) {
    if (rng.bernoulli(1.0 - p_c)) kept.push_back(e);
  }
  return g.with_edges(std::move(kept));
}

}  // namespace muse
