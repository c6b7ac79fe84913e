#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "hcvae/checkpoint.hpp"
#include "hcvae/dataset.hpp"

namespace hcvae {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double beta = 1.0;
  std::uint64_t seed = 0;
  ConditionMode mode = ConditionMode::kNone;
  bool shuffle = true;

  void validate() const;
};

// Full-pass objective on the training set, evaluated at the posterior mean.
// Row 0 is the starting point before any update.
struct EpochLoss {
  std::size_t epoch = 0;
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLoss> trace;
  std::vector<double> step_losses;  // minibatch loss before each Adam step
};

// Deterministic ELBO over the whole set with eps = 0, chunked.
LossTerms evaluate_loss(const ModelParams<float>& params, const TrainingSet& data, double beta);

// Trains from the weights in start with a fresh Adam state. cfg.mode must
// match start.mode and the data widths must match start's config. Throws
// NumericError naming the epoch and batch if the loss stops being finite.
TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const Checkpoint& start);

// Domain adaptation: identical to train() from a donor checkpoint. Throws
// ConfigError when the donor cannot consume the new data.
TrainResult finetune(const Checkpoint& donor, const TrainingSet& data, const TrainConfig& cfg);

// "epoch,loss,recon,kl"
void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& trace);

}  // namespace hcvae
