#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "hcvae/linalg.hpp"

namespace hcvae::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hcvae_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

template <typename T>
Matrix<T> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix<T> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<T>(d(rng));
  return m;
}

// Triple loop: out(b, o) = act(sum_i in(b, i) * W(o, i) + bias(o)).
template <typename T>
Matrix<T> naive_dense(const DenseLayer<T>& l, const Matrix<T>& in) {
  Matrix<T> out(in.rows(), l.weights.rows());
  for (Eigen::Index b = 0; b < in.rows(); ++b)
    for (Eigen::Index o = 0; o < l.weights.rows(); ++o) {
      T acc = l.bias(o);
      for (Eigen::Index i = 0; i < in.cols(); ++i) acc += in(b, i) * l.weights(o, i);
      if (l.activation == Activation::kRelu && acc < T(0)) acc = T(0);
      out(b, o) = acc;
    }
  return out;
}

}  // namespace hcvae::testing
