#include "muse/adam.hpp"

#include <cmath>
#include <string>

#include "muse/errors.hpp"

namespace muse {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: state holds " + std::to_string(state.m.size()) + " buffers for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size() || state.v[i].size() != params[i].size()) {
      throw ContractError("adam_step: moment buffer " + std::to_string(i) + " does not match parameter " +
                          params[i].shape_string());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    const std::vector<double> g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg), state_(AdamState::for_params(params_)) {}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace muse
