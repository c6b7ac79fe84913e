#pragma once

// Gradient check of the full conditional ELBO at a given architecture, with
// frozen reparameterization noise. Used by the CLI and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <string>

#include "hcvae/gradcheck.hpp"
#include "hcvae/vae.hpp"

namespace hcvae {

struct ElboGradCheckConfig {
  VaeConfig architecture{.cond_dim = 8};
  std::size_t batch = 8;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t coordinates_per_tensor = 32;
  double step = 1e-4;
  int order = 4;
  std::uint64_t seed = 0;
};

struct ElboGradCheckReport {
  // Both compare against central differences of the ELBO computed in long
  // double on the same (float-representable) weights.
  GradCheckResult f64;
  GradCheckResult f32;
  std::string worst_tensor_f64;
  std::string worst_tensor_f32;
  std::size_t parameter_count = 0;
  // Sampled coordinates whose +-step probe flips some ReLU unit. Central
  // differences are not derivatives there, so they are left out of f64/f32.
  std::size_t kink_skipped = 0;
};

ElboGradCheckReport check_elbo_gradients(const ElboGradCheckConfig& cfg);

}  // namespace hcvae
