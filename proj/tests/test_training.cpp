#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hcvae/trainer.hpp"
#include "test_util.hpp"

namespace hcvae {
namespace {

VaeConfig toy_arch(std::size_t dim = 8) {
  VaeConfig a;
  a.input_dim = dim;
  a.hidden_dim = 16;
  a.n_hidden_enc = 2;
  a.n_hidden_dec = 2;
  a.latent_dim = 2;
  return a;
}

SpectrogramConfig toy_spec() {
  SpectrogramConfig s;
  s.frame_size = 64;
  s.hop = 32;
  s.mel_bins = 4;
  s.stack = 2;
  return s;
}

Taxonomy toy_tax() { return Taxonomy::from_pairs({{"fan", "id_00"}, {"fan", "id_02"}, {"pump", "id_00"}}); }

Checkpoint toy_start(ConditionMode mode, std::uint64_t seed = 1, std::size_t dim = 8) {
  SpectrogramConfig spec = toy_spec();
  if (dim != spec.feature_dim()) {
    spec.mel_bins = dim;
    spec.stack = 1;
  }
  return initial_checkpoint(toy_arch(dim), toy_tax(), mode, spec, 16000, Standardizer::identity(dim), seed);
}

// Two clusters keyed by machine type.
TrainingSet toy_data(ConditionMode mode, std::size_t n = 256, std::uint64_t seed = 4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.1f);
  TrainingSet s;
  s.features.resize(static_cast<Eigen::Index>(n), 8);
  const auto tax = toy_tax();
  s.conditions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(tax.condition_dim(mode)));
  for (std::size_t r = 0; r < n; ++r) {
    const bool fan = r % 2 == 0;
    for (Eigen::Index k = 0; k < 8; ++k)
      s.features(static_cast<Eigen::Index>(r), k) = (fan ? std::sin(0.7f * k) : std::cos(0.4f * k)) + d(rng);
    const auto c = encode_condition(tax, fan ? "fan" : "pump", "id_00", mode);
    for (std::size_t k = 0; k < c.size(); ++k)
      s.conditions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = c.values[k];
  }
  return s;
}

TEST(Train, TraceStartsAtPreUpdateLoss) {
  const auto start = toy_start(ConditionMode::kBoth);
  const auto data = toy_data(ConditionMode::kBoth);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.mode = ConditionMode::kBoth;
  const auto r = train(data, cfg, start);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(r.trace[0].loss, evaluate_loss(start.params, data, 1.0).loss);
  EXPECT_EQ(r.step_losses.size(), 3u * 8u);
  EXPECT_EQ(r.checkpoint.training.epochs_run, 3u);
  EXPECT_EQ(r.checkpoint.training.final_loss, r.trace.back().loss);
  EXPECT_LT(r.trace.back().loss, r.trace.front().loss);
}

TEST(Train, SameSeedSameTrace) {
  const auto data = toy_data(ConditionMode::kLevel1Only);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 50;
  cfg.seed = 17;
  cfg.mode = ConditionMode::kLevel1Only;
  const auto a = train(data, cfg, toy_start(cfg.mode));
  const auto b = train(data, cfg, toy_start(cfg.mode));
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
  EXPECT_EQ(a.step_losses, b.step_losses);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  cfg.seed = 18;
  EXPECT_NE(train(data, cfg, toy_start(cfg.mode)).step_losses, a.step_losses);
}

TEST(Train, SingleRepeatedVectorLossFallsWithinOneEpoch) {
  TrainingSet s;
  // Batch 64 averages out the sampled reparameterization noise; smaller
  // batches make step-to-step comparisons a coin flip near convergence.
  s.features = Matrix<float>::Zero(6400, 8);
  for (Eigen::Index r = 0; r < 6400; ++r)
    for (Eigen::Index k = 0; k < 8; ++k) s.features(r, k) = 1.0f + 0.5f * static_cast<float>(k);
  s.conditions.resize(6400, 0);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 64;
  cfg.beta = 0.0;
  cfg.lr = 1e-3;
  const auto r = train(s, cfg, toy_start(ConditionMode::kNone));
  ASSERT_EQ(r.step_losses.size(), 100u);
  std::size_t down = 0;
  for (std::size_t i = 1; i < r.step_losses.size(); ++i) down += r.step_losses[i] < r.step_losses[i - 1];
  EXPECT_GE(down, 90u) << "decreasing steps";
  EXPECT_LT(r.trace[1].loss, r.trace[0].loss);
}

TEST(Train, GuardsRunBeforeAnyWork) {
  auto data = toy_data(ConditionMode::kBoth);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.mode = ConditionMode::kNone;
  EXPECT_THROW(train(data, cfg, toy_start(ConditionMode::kBoth)), ConfigError);
  cfg.mode = ConditionMode::kBoth;
  EXPECT_THROW(train(data, cfg, toy_start(ConditionMode::kBoth, 1, 9)), ConfigError);
  cfg.batch_size = 0;
  EXPECT_THROW(train(data, cfg, toy_start(ConditionMode::kBoth)), ConfigError);
  cfg.batch_size = 8;
  cfg.lr = -1.0;
  EXPECT_THROW(train(data, cfg, toy_start(ConditionMode::kBoth)), ConfigError);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
  auto data = toy_data(ConditionMode::kNone);
  data.features(5, 3) = std::numeric_limits<float>::infinity();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.shuffle = false;
  try {
    train(data, cfg, toy_start(ConditionMode::kNone));
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Finetune, ZeroEpochsKeepsParameters) {
  const auto data = toy_data(ConditionMode::kBoth);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.mode = ConditionMode::kBoth;
  const auto donor = train(data, cfg, toy_start(cfg.mode)).checkpoint;
  cfg.epochs = 0;
  const auto r = finetune(donor, toy_data(ConditionMode::kBoth, 64, 9), cfg);
  EXPECT_EQ(r.checkpoint.params, donor.params);
  EXPECT_EQ(r.checkpoint.standardizer, donor.standardizer);
  ASSERT_EQ(r.trace.size(), 1u);
}

TEST(Finetune, EpochZeroIsDonorLossOnNewData) {
  const auto data = toy_data(ConditionMode::kBoth);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.mode = ConditionMode::kBoth;
  const auto donor = train(data, cfg, toy_start(cfg.mode)).checkpoint;
  const auto other = toy_data(ConditionMode::kBoth, 96, 77);
  const auto r = finetune(donor, other, cfg);
  EXPECT_EQ(r.trace[0].loss, evaluate_loss(donor.params, other, 1.0).loss);
}

TEST(Finetune, MismatchedInputDimRejected) {
  const auto donor = toy_start(ConditionMode::kNone, 1, 9);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(finetune(donor, toy_data(ConditionMode::kNone), cfg), ConfigError);
}

TEST(LossCsv, HeaderAndRows) {
  std::ostringstream out;
  write_loss_csv(out, {{0, 10.5, 10.0, 0.5}, {1, 3.0, 2.0, 1.0}});
  EXPECT_EQ(out.str(), "epoch,loss,recon,kl\n0,10.5,10,0.5\n1,3,2,1\n");
}

}  // namespace
}  // namespace hcvae
