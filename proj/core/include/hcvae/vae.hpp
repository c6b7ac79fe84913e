#pragma once

// Conditional variational autoencoder. The encoder sees [x | c], the decoder
// sees [z | c], where c is the (possibly empty) taxonomy condition. With an
// empty condition the model is the plain VAE baseline.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcvae/linalg.hpp"

namespace hcvae {

struct VaeConfig {
  std::size_t input_dim = 640;
  std::size_t hidden_dim = 128;
  std::size_t n_hidden_enc = 4;
  std::size_t n_hidden_dec = 4;
  std::size_t latent_dim = 8;
  std::size_t cond_dim = 0;
  double beta = 1.0;

  void validate() const;
  bool operator==(const VaeConfig&) const = default;
};

struct TensorShape {
  std::string name;
  std::vector<std::size_t> dims;
};

template <typename T>
struct ModelParams {
  VaeConfig config;
  std::vector<DenseLayer<T>> encoder;  // ReLU stack on [x | c]
  DenseLayer<T> mu_head;               // Linear
  DenseLayer<T> logvar_head;           // Linear
  std::vector<DenseLayer<T>> decoder;  // ReLU stack on [z | c]
  DenseLayer<T> output;                // Linear

  // Scaled-uniform weights, zero biases, fully determined by seed.
  static ModelParams init(const VaeConfig& config, std::uint64_t seed);
  // Same layout with every entry zero; used as a gradient accumulator.
  static ModelParams zeros(const VaeConfig& config);

  // Tensors in a fixed order: per layer weight then bias, encoder layers,
  // mu head, logvar head, decoder layers, output layer.
  std::vector<std::span<T>> tensors();
  std::vector<std::span<const T>> tensors() const;
  std::vector<TensorShape> tensor_shapes() const;
  std::size_t parameter_count() const;

  std::vector<T> flatten() const;
  void assign_flat(std::span<const T> values);

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    for (const auto& l : encoder) out.encoder.push_back(l.template cast<U>());
    out.mu_head = mu_head.template cast<U>();
    out.logvar_head = logvar_head.template cast<U>();
    for (const auto& l : decoder) out.decoder.push_back(l.template cast<U>());
    out.output = output.template cast<U>();
    return out;
  }

  bool operator==(const ModelParams&) const = default;
};

template <typename T>
using ModelGrads = ModelParams<T>;

template <typename T>
struct Posterior {
  Matrix<T> mu;      // batch x latent
  Matrix<T> logvar;  // batch x latent
};

struct LossTerms {
  double loss = 0.0;   // recon + beta * kl
  double recon = 0.0;  // batch mean of the summed squared error
  double kl = 0.0;     // batch mean of KL(q(z|x,c) || N(0, I))
};

// Rows of x (and c) are batch elements. The overloads without c are the
// unconditional baseline path and require cond_dim == 0.
template <typename T>
Posterior<T> encode(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c);
template <typename T>
Posterior<T> encode(const ModelParams<T>& params, const Matrix<T>& x);

// z = mu + exp(0.5 * logvar) * eps, elementwise.
template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& eps);

template <typename T>
Matrix<T> decode(const ModelParams<T>& params, const Matrix<T>& z, const Matrix<T>& c);
template <typename T>
Matrix<T> decode(const ModelParams<T>& params, const Matrix<T>& z);

// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
template <typename T>
T kl_gaussian(std::span<const T> mu, std::span<const T> logvar);

template <typename T>
LossTerms elbo_loss(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c, const Matrix<T>& eps,
                    double beta);
template <typename T>
LossTerms elbo_loss(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& eps, double beta);

// Loss plus exact gradients of the loss w.r.t. every parameter; grads is
// overwritten.
template <typename T>
LossTerms elbo_loss_and_grad(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c,
                             const Matrix<T>& eps, double beta, ModelGrads<T>& grads);
template <typename T>
LossTerms elbo_loss_and_grad(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& eps, double beta,
                             ModelGrads<T>& grads);

// Sampling-free anomaly score per row: sum_d (x_d - decode(mu(x, c), c)_d)^2.
template <typename T>
Vector<T> reconstruction_errors(const ModelParams<T>& params, const Matrix<T>& x, const Matrix<T>& c);

template <typename T>
T reconstruction_error(const ModelParams<T>& params, std::span<const T> x, std::span<const T> c);

}  // namespace hcvae
