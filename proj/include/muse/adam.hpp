#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muse/tensor.hpp"

namespace muse {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moment buffers, one pair per parameter tensor.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  // Zeroed buffers shaped like `params`.
  static AdamState for_params(std::span<const Tensor> params);
};

// One bias-corrected Adam update of every tensor in `params` using its
// accumulated gradient (a missing gradient counts as zero).
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg);

// Convenience owner of a parameter group and its state.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step() { adam_step(params_, state_, cfg_); }
  void zero_grad();
  const AdamState& state() const { return state_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  AdamState state_;
};

}  // namespace muse
