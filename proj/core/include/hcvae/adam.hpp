#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hcvae/errors.hpp"

namespace hcvae {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment accumulators, one buffer per parameter tensor, sized on first use.
template <typename T>
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamOptions opts) : options(opts) {}
};

// One bias-corrected Adam update applied in place to every parameter tensor.
template <typename T>
void adam_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads,
               AdamState<T>& state) {
  if (params.size() != grads.size())
    throw DimensionError("adam_step: parameter and gradient tensor counts differ");
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i].size(), T(0));
      state.second_moment[i].assign(params[i].size(), T(0));
    }
  }
  if (state.first_moment.size() != params.size())
    throw DimensionError("adam_step: state holds a different number of tensors");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.first_moment[i].size() != params[i].size())
      throw DimensionError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T m_corr = static_cast<T>(1.0 / (1.0 - std::pow(o.beta1, t)));
  const T v_corr = static_cast<T>(1.0 / (1.0 - std::pow(o.beta2, t)));
  const T lr = static_cast<T>(o.lr);
  const T eps = static_cast<T>(o.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = state.first_moment[i].data();
    T* v = state.second_moment[i].data();
    const std::size_t n = params[i].size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      p[k] -= lr * (m[k] * m_corr) / (std::sqrt(v[k] * v_corr) + eps);
    }
  }
}

template <typename T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads,
               AdamState<T>& state) {
  adam_step(std::span<const std::span<T>>(params), std::span<const std::span<const T>>(grads), state);
}

}  // namespace hcvae
