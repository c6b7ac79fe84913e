#pragma once

// Dense matrices and fully connected layers with exact reverse-mode
// gradients. Everything here is templated on the scalar type so the same
// code runs in float (training) and double (gradient checks).

#include <cmath>
#include <cstddef>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "hcvae/errors.hpp"

namespace hcvae {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class Activation { kLinear, kRelu };

template <typename T>
struct DenseLayer {
  Matrix<T> weights;  // out x in
  Vector<T> bias;     // out
  Activation activation = Activation::kLinear;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }

  template <typename U>
  DenseLayer<U> cast() const {
    return DenseLayer<U>{weights.template cast<U>(), bias.template cast<U>(), activation};
  }

  bool operator==(const DenseLayer&) const = default;
};

template <typename T>
struct DenseGrad {
  Matrix<T> weights;
  Vector<T> bias;
  Matrix<T> input;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// Scaled-uniform initialization in +-sqrt(6 / (fan_in + fan_out)), zero bias.
template <typename T, typename Rng>
DenseLayer<T> make_dense_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  require_dims(in >= 1 && out >= 1, "dense layer needs in >= 1 and out >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer<T> layer;
  layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      layer.weights(r, c) = static_cast<T>(dist(rng));
  layer.bias = Vector<T>::Zero(static_cast<Eigen::Index>(out));
  layer.activation = act;
  return layer;
}

template <typename T>
Matrix<T> dense_preactivation(const DenseLayer<T>& layer, const Matrix<T>& input) {
  require_dims(layer.bias.size() == layer.weights.rows(), "dense layer bias length != weight rows");
  require_dims(input.cols() == layer.weights.cols(),
               "dense input has " + std::to_string(input.cols()) + " columns, layer expects " +
                   std::to_string(layer.weights.cols()));
  Matrix<T> pre(input.rows(), layer.weights.rows());
  pre.noalias() = input * layer.weights.transpose();
  pre.rowwise() += layer.bias.transpose();
  return pre;
}

// activation(input * W^T + b), one row per batch element.
template <typename T>
Matrix<T> dense_forward(const DenseLayer<T>& layer, const Matrix<T>& input) {
  Matrix<T> out = dense_preactivation(layer, input);
  if (layer.activation == Activation::kRelu) out = out.cwiseMax(T(0));
  return out;
}

// Backward pass given the forward output; the ReLU mask is output > 0,
// which coincides with pre-activation > 0.
template <typename T>
DenseGrad<T> dense_backward(const DenseLayer<T>& layer, const Matrix<T>& input,
                            const Matrix<T>& output, const Matrix<T>& grad_out) {
  require_dims(input.cols() == layer.weights.cols(), "dense_backward: input width mismatch");
  require_dims(grad_out.rows() == input.rows() && grad_out.cols() == layer.weights.rows(),
               "dense_backward: grad_out shape mismatch");
  require_dims(output.rows() == grad_out.rows() && output.cols() == grad_out.cols(),
               "dense_backward: output shape mismatch");
  Matrix<T> delta;
  if (layer.activation == Activation::kRelu) {
    delta = (output.array() > T(0)).select(grad_out, T(0));
  } else {
    delta = grad_out;
  }
  DenseGrad<T> g;
  g.weights.noalias() = delta.transpose() * input;
  g.bias = delta.colwise().sum().transpose();
  g.input.noalias() = delta * layer.weights;
  return g;
}

template <typename T>
DenseGrad<T> dense_backward(const DenseLayer<T>& layer, const Matrix<T>& input,
                            const Matrix<T>& grad_out) {
  return dense_backward(layer, input, dense_forward(layer, input), grad_out);
}

// Horizontal concatenation [left | right]; rows must agree.
template <typename T>
Matrix<T> hconcat(const Matrix<T>& left, const Matrix<T>& right) {
  require_dims(left.rows() == right.rows(), "hconcat: row count mismatch");
  Matrix<T> out(left.rows(), left.cols() + right.cols());
  out.leftCols(left.cols()) = left;
  out.rightCols(right.cols()) = right;
  return out;
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return m.allFinite();
}

}  // namespace hcvae
