#include <random>

#include <benchmark/benchmark.h>

#include "hcvae/linalg.hpp"
#include "hcvae/vae.hpp"

namespace {

using hcvae::Matrix;

Matrix<float> gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// Widths of the default first encoder layer: 640 (+8 condition) -> 128.
void BM_DenseForward(benchmark::State& state) {
  const auto batch = state.range(0);
  std::mt19937_64 rng(1);
  const auto layer = hcvae::make_dense_layer<float>(648, 128, hcvae::Activation::kRelu, rng);
  const Matrix<float> x = gaussian(batch, 648, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hcvae::dense_forward(layer, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseForward)->Arg(64)->Arg(512);

void BM_DenseBackward(benchmark::State& state) {
  const auto batch = state.range(0);
  std::mt19937_64 rng(1);
  const auto layer = hcvae::make_dense_layer<float>(648, 128, hcvae::Activation::kRelu, rng);
  const Matrix<float> x = gaussian(batch, 648, 2);
  const Matrix<float> y = hcvae::dense_forward(layer, x);
  const Matrix<float> g = gaussian(batch, 128, 3);
  for (auto _ : state) benchmark::DoNotOptimize(hcvae::dense_backward(layer, x, y, g));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseBackward)->Arg(64)->Arg(512);

// One minibatch of the default model: forward, loss and all gradients.
void BM_ElboStep(benchmark::State& state) {
  const auto batch = state.range(0);
  hcvae::VaeConfig cfg;
  cfg.cond_dim = 8;
  const auto params = hcvae::ModelParams<float>::init(cfg, 4);
  const Matrix<float> x = gaussian(batch, 640, 5);
  Matrix<float> c = Matrix<float>::Zero(batch, 8);
  c.col(0).setOnes();
  c.col(5).setOnes();
  const Matrix<float> eps = gaussian(batch, 8, 6);
  hcvae::ModelGrads<float> grads;
  for (auto _ : state) benchmark::DoNotOptimize(hcvae::elbo_loss_and_grad(params, x, c, eps, 1.0, grads));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ElboStep)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
