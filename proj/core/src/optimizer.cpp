// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/optimizer.hpp"

#include <cmath>

#include "rff/errors.hpp"

namespace rff {

AdamState::AdamState(std::span<Param* const> params, AdamConfig config_) : config(config_) {
  if (!(config.beta1 >= 0.0f && config.beta1 < 1.0f && config.beta2 >= 0.0f &&
        config.beta2 < 1.0f)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(config.learning_rate > 0.0f) || !(config.epsilon > 0.0f)) {
    throw ParameterError("Adam learning rate and epsilon must be positive");
  }
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Param* p : params) {
    first_moment.emplace_back(p->value.shape());
    second_moment.emplace_back(p->value.shape());
  }
}

void adam_update(AdamState& state, std::span<Param* const> params) {
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("Adam state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const auto correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta1), t));
  const auto correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.trainable) continue;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw DimensionError("Adam shape mismatch for " + p.name);
    }
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* mp = m.data();
    float* vp = v.data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      mp[j] = c.beta1 * mp[j] + (1.0f - c.beta1) * g[j];
      vp[j] = c.beta2 * vp[j] + (1.0f - c.beta2) * g[j] * g[j];
      const float m_hat = mp[j] / correction1;
      const float v_hat = vp[j] / correction2;
      w[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace rff
