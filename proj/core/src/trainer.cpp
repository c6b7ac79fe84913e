#include "hcvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "hcvae/adam.hpp"
#include "hcvae/errors.hpp"
#include "hcvae/format.hpp"

namespace hcvae {
namespace {

constexpr Eigen::Index kEvalChunk = 4096;

void check_compatible(const Checkpoint& start, const TrainingSet& data, const TrainConfig& cfg) {
  if (cfg.mode != start.mode)
    throw ConfigError("training mode " + std::string(to_string(cfg.mode)) + " differs from the model's mode " +
                      std::string(to_string(start.mode)));
  if (static_cast<std::size_t>(data.features.cols()) != start.vae.input_dim)
    throw ConfigError("data has feature width " + std::to_string(data.features.cols()) + ", model expects " +
                      std::to_string(start.vae.input_dim));
  if (static_cast<std::size_t>(data.conditions.cols()) != start.vae.cond_dim)
    throw ConfigError("data has condition width " + std::to_string(data.conditions.cols()) + ", model expects " +
                      std::to_string(start.vae.cond_dim));
  if (data.conditions.rows() != data.features.rows())
    throw DimensionError("feature and condition row counts differ");
}

void check_finite(const LossTerms& t, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(t.loss) || !std::isfinite(t.recon) || !std::isfinite(t.kl))
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) +
                       " (recon=" + format_real(t.recon) + ", kl=" + format_real(t.kl) + ")");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
}

LossTerms evaluate_loss(const ModelParams<float>& params, const TrainingSet& data, double beta) {
  const Eigen::Index n = data.features.rows();
  if (n == 0) throw IngestionError("evaluate_loss: empty dataset");
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  for (Eigen::Index at = 0; at < n; at += kEvalChunk) {
    const Eigen::Index rows = std::min(kEvalChunk, n - at);
    const Matrix<float> x = data.features.middleRows(at, rows);
    const Matrix<float> c = data.conditions.middleRows(at, rows);
    const Matrix<float> eps = Matrix<float>::Zero(rows, static_cast<Eigen::Index>(params.config.latent_dim));
    const LossTerms t = elbo_loss(params, x, c, eps, beta);
    const double w = static_cast<double>(rows);
    loss += t.loss * w;
    recon += t.recon * w;
    kl += t.kl * w;
  }
  const double inv = 1.0 / static_cast<double>(n);
  return LossTerms{loss * inv, recon * inv, kl * inv};
}

TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const Checkpoint& start) {
  cfg.validate();
  if (data.size() == 0) throw IngestionError("training set is empty");
  check_compatible(start, data, cfg);

  TrainResult result;
  result.checkpoint = start;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.vae.beta = cfg.beta;
  ckpt.params.config.beta = cfg.beta;
  ModelParams<float>& params = ckpt.params;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  AdamState<float> adam(AdamOptions{cfg.lr, 0.9, 0.999, 1e-8});
  ModelGrads<float> grads;

  const auto n = static_cast<Eigen::Index>(data.size());
  const auto latent = static_cast<Eigen::Index>(ckpt.vae.latent_dim);
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  auto record = [&](std::size_t epoch) {
    const LossTerms t = evaluate_loss(params, data, cfg.beta);
    check_finite(t, epoch, 0);
    result.trace.push_back(EpochLoss{epoch, t.loss, t.recon, t.kl});
  };
  record(0);

  Matrix<float> x;
  Matrix<float> c;
  Matrix<float> eps;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch_index = 0;
    for (Eigen::Index at = 0; at < n; at += batch, ++batch_index) {
      const Eigen::Index rows = std::min(batch, n - at);
      x.resize(rows, data.features.cols());
      c.resize(rows, data.conditions.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index src = order[static_cast<std::size_t>(at + r)];
        x.row(r) = data.features.row(src);
        c.row(r) = data.conditions.row(src);
      }
      eps.resize(rows, latent);
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);

      const LossTerms t = elbo_loss_and_grad(params, x, c, eps, cfg.beta, grads);
      check_finite(t, epoch, batch_index);
      result.step_losses.push_back(t.loss);
      const auto grad_views = static_cast<const ModelGrads<float>&>(grads).tensors();
      adam_step(params.tensors(), grad_views, adam);
    }
    record(epoch);
  }

  ckpt.training.epochs_run = cfg.epochs;
  ckpt.training.final_loss = result.trace.back().loss;
  ckpt.training.seed = cfg.seed;
  return result;
}

TrainResult finetune(const Checkpoint& donor, const TrainingSet& data, const TrainConfig& cfg) {
  check_compatible(donor, data, cfg);
  return train(data, cfg, donor);
}

void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& trace) {
  out << "epoch,loss,recon,kl\n";
  for (const auto& e : trace)
    out << e.epoch << ',' << format_real(e.loss) << ',' << format_real(e.recon) << ',' << format_real(e.kl) << '\n';
}

}  // namespace hcvae
