#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "hcvae/errors.hpp"

namespace hcvae {

struct GradCheckOptions {
  double step = 1e-5;
  // 2: (f(p+h) - f(p-h)) / 2h. 4: five-point stencil, error O(h^4), which
  // tolerates a larger step and so less cancellation in f(p+h) - f(p-h).
  int order = 2;
  // Number of coordinates sampled without replacement; 0 checks all of them.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

inline double gradcheck_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Central differences of loss_fn at the listed coordinates of params.
// loss_fn must be deterministic in its argument (freeze every noise source).
inline std::vector<double> central_differences(const std::function<double(std::span<const double>)>& loss_fn,
                                               std::span<const double> params, std::span<const std::size_t> coords,
                                               double step, int order = 2) {
  if (!(step > 0.0)) throw ConfigError("central_differences: step must be positive");
  if (order != 2 && order != 4) throw ConfigError("central_differences: order must be 2 or 4");
  std::vector<double> probe(params.begin(), params.end());
  auto eval = [&]() {
    const double v = loss_fn(probe);
    if (!std::isfinite(v)) throw NumericError("gradient check: loss is not finite");
    return v;
  };
  eval();
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t idx : coords) {
    if (idx >= probe.size()) throw DimensionError("central_differences: coordinate out of range");
    const double saved = probe[idx];
    auto at = [&](double offset) {
      probe[idx] = saved + offset;
      return eval();
    };
    if (order == 2) {
      out.push_back((at(step) - at(-step)) / (2.0 * step));
    } else {
      const double d1 = at(step) - at(-step);
      const double d2 = at(2.0 * step) - at(-2.0 * step);
      out.push_back((8.0 * d1 - d2) / (12.0 * step));
    }
    probe[idx] = saved;
  }
  return out;
}

inline GradCheckResult compare_gradients(std::span<const double> analytic_grad, std::span<const std::size_t> coords,
                                         std::span<const double> numeric) {
  if (coords.size() != numeric.size()) throw DimensionError("compare_gradients: length mismatch");
  GradCheckResult result;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const double err = gradcheck_relative_error(analytic_grad[coords[k]], numeric[k]);
    if (result.coordinates_checked == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = coords[k];
    }
    ++result.coordinates_checked;
  }
  return result;
}

// Compares an analytic gradient against central differences of loss_fn.
inline GradCheckResult finite_diff_gradcheck(const std::function<double(std::span<const double>)>& loss_fn,
                                             std::span<const double> params,
                                             std::span<const double> analytic_grad,
                                             const GradCheckOptions& opts = {}) {
  if (params.size() != analytic_grad.size())
    throw DimensionError("finite_diff_gradcheck: gradient length differs from parameter length");

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opts.max_coordinates != 0 && opts.max_coordinates < coords.size()) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }
  const auto numeric = central_differences(loss_fn, params, coords, opts.step, opts.order);
  return compare_gradients(analytic_grad, coords, numeric);
}

}  // namespace hcvae
