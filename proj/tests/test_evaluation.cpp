#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hcvae/evaluation.hpp"
#include "hcvae/synth.hpp"
#include "hcvae/trainer.hpp"
#include "test_util.hpp"

namespace hcvae {
namespace {

std::vector<ScoreRecord> records(const std::vector<double>& normal, const std::vector<double>& anomaly) {
  std::vector<ScoreRecord> out;
  for (double s : normal) out.push_back({"n" + std::to_string(out.size()), "fan", "id_00", s, ClipLabel::kNormal});
  for (double s : anomaly) out.push_back({"a" + std::to_string(out.size()), "fan", "id_00", s, ClipLabel::kAnomaly});
  return out;
}

TEST(Auc, PerfectAndInverted) {
  const auto a = auc(records({1, 2}, {3, 4}));
  EXPECT_EQ(a.auc_pairwise, 1.0);
  EXPECT_EQ(a.auc_rank, 1.0);
  EXPECT_EQ(a.n_normal, 2u);
  EXPECT_EQ(a.n_anomaly, 2u);
  EXPECT_EQ(auc(records({3, 4}, {1, 2})).auc_pairwise, 0.0);
}

TEST(Auc, WorkedPairwiseCase) {
  EXPECT_EQ(auc(records({1, 3}, {2, 4})).auc_pairwise, 0.75);
  EXPECT_EQ(auc(records({1, 3}, {2, 4})).auc_rank, 0.75);
}

TEST(Auc, AllTiedDiverges) {
  const auto a = auc(records({5, 5, 5}, {5, 5}));
  EXPECT_EQ(a.auc_pairwise, 1.0);
  EXPECT_EQ(a.auc_rank, 0.5);
}

TEST(Auc, EtaShiftsThreshold) {
  EXPECT_EQ(auc(records({1, 3}, {2, 4}), {.eta = 1.5}).auc_pairwise, 0.25);
  EXPECT_EQ(auc(records({1, 3}, {2, 4}), {.eta = -10}).auc_pairwise, 1.0);
}

TEST(Auc, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> count(1, 12), value(0, 6);
    std::vector<double> n(count(rng)), a(count(rng));
    for (auto& v : n) v = value(rng) * 0.5;
    for (auto& v : a) v = value(rng) * 0.5;
    double hits = 0.0, mw = 0.0;
    for (double x : a)
      for (double y : n) {
        hits += (x - y >= 0.0);
        mw += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
      }
    const auto got = auc(records(n, a));
    EXPECT_EQ(got.auc_pairwise, hits / (n.size() * a.size()));
    EXPECT_NEAR(got.auc_rank, mw / (n.size() * a.size()), 1e-12);
  }
}

TEST(Auc, ThresholdedFormMatchesPairLoopAtAnyEta) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> n(1 + trial % 40), a(1 + (trial * 7) % 33);
    // Values like 0.1 + k * 0.1 make pos - neg land next to eta after rounding.
    for (auto& v : n) v = 0.1 * std::round(10.0 * u(rng)) + (trial % 3 == 0 ? 1e-17 * u(rng) : 0.0);
    for (auto& v : a) v = 0.1 * std::round(10.0 * u(rng));
    const double eta = trial % 2 == 0 ? 0.1 * std::round(10.0 * u(rng)) : u(rng);
    std::uint64_t hits = 0;
    for (double x : a)
      for (double y : n) hits += (x - y >= eta);
    EXPECT_EQ(auc(records(n, a), {.eta = eta}).auc_pairwise, static_cast<double>(hits) / (n.size() * a.size()));
  }
}

TEST(Auc, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  std::vector<double> n(40), a(30);
  for (auto& v : n) v = std::round(d(rng) * 4) / 4;
  for (auto& v : a) v = std::round((d(rng) + 0.7) * 4) / 4;
  auto r = records(n, a);
  const auto ref = auc(r);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(r.begin(), r.end(), rng);
    const auto got = auc(r);
    EXPECT_EQ(got.auc_pairwise, ref.auc_pairwise);
    EXPECT_EQ(got.auc_rank, ref.auc_rank);
  }
}

TEST(Auc, BoundsProperty) {
  std::mt19937_64 rng(6);
  std::exponential_distribution<double> d;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> n(1 + trial % 9), a(1 + trial % 5);
    for (auto& v : n) v = d(rng);
    for (auto& v : a) v = d(rng);
    const auto got = auc(records(n, a));
    EXPECT_GE(got.auc_pairwise, 0.0);
    EXPECT_LE(got.auc_pairwise, 1.0);
    EXPECT_GE(got.auc_rank, 0.0);
    EXPECT_LE(got.auc_rank, 1.0);
    // Without ties both forms agree and swapping labels mirrors them.
    EXPECT_NEAR(got.auc_pairwise, got.auc_rank, 1e-12);
    EXPECT_NEAR(auc(records(a, n)).auc_rank, 1.0 - got.auc_rank, 1e-12);
  }
}

TEST(Auc, UndefinedAndNonFinite) {
  EXPECT_THROW(auc(records({1, 2}, {})), UndefinedAucError);
  EXPECT_THROW(auc(records({}, {1})), UndefinedAucError);
  EXPECT_THROW(auc(records({1, std::nan("")}, {2})), NumericError);
}

TEST(Summarize, GroupsAndMacroAverage) {
  std::vector<ScoreRecord> r = {
      {"p/a", "pump", "id_02", 1, ClipLabel::kNormal}, {"p/b", "pump", "id_02", 0, ClipLabel::kAnomaly},
      {"f/a", "fan", "id_00", 1, ClipLabel::kNormal},  {"f/b", "fan", "id_00", 2, ClipLabel::kAnomaly},
      {"v/a", "valve", "id_00", 1, ClipLabel::kNormal},
  };
  const auto rep = summarize_scores(r, {});
  ASSERT_EQ(rep.groups.size(), 3u);
  EXPECT_EQ(rep.groups[0].machine_type, "fan");
  EXPECT_EQ(rep.groups[2].machine_type, "valve");
  EXPECT_FALSE(rep.groups[2].result.has_value());
  EXPECT_EQ(rep.defined_groups, 2u);
  EXPECT_DOUBLE_EQ(rep.macro_auc_rank, 0.5);
  EXPECT_EQ(rep.scores.front().clip_id, "f/a");

  std::ostringstream out;
  write_auc_csv(out, rep);
  EXPECT_EQ(out.str(),
            "machine_type,machine_id,n_normal,n_anomaly,auc_pairwise,auc_rank\n"
            "fan,id_00,1,1,1,1\npump,id_02,1,1,0,0\nvalve,id_00,1,0,,\n");
  std::ostringstream s;
  write_scores_csv(s, {r[0]});
  EXPECT_EQ(s.str(), "clip_id,machine_type,machine_id,label,score\np/a,pump,id_02,normal,1\n");
}

// Heavily trained model on one repeated vector.
struct OverfitToy {
  Checkpoint ckpt;
  Matrix<float> row;
  double train_recon = 0.0;
};

OverfitToy overfit_toy() {
  VaeConfig a;
  a.input_dim = 6;
  a.hidden_dim = 16;
  a.n_hidden_enc = 2;
  a.n_hidden_dec = 2;
  a.latent_dim = 2;
  SpectrogramConfig spec;
  spec.frame_size = 64;
  spec.hop = 32;
  spec.mel_bins = 3;
  spec.stack = 2;
  const auto tax = Taxonomy::from_pairs({{"fan", "id_00"}});
  auto start = initial_checkpoint(a, tax, ConditionMode::kBoth, spec, 16000, Standardizer::identity(6), 2);
  TrainingSet s;
  Matrix<float> row(1, 6);
  row << 0.5f, -1.0f, 2.0f, 0.0f, 1.5f, -0.5f;
  s.features = row.replicate(64, 1);
  s.conditions = condition_rows(tax, "fan", "id_00", ConditionMode::kBoth, 64);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 16;
  cfg.lr = 3e-3;
  cfg.mode = ConditionMode::kBoth;
  auto r = train(s, cfg, start);
  return {r.checkpoint, row, evaluate_loss(r.checkpoint.params, s, 1.0).recon};
}

TEST(Scorer, OverfitVectorScoresItsTrainingError) {
  const auto toy = overfit_toy();
  Scorer scorer(toy.ckpt);
  FeatureMatrix f;
  f.values = toy.row.replicate(5, 1);
  f.mel_bins = 3;
  f.stack = 2;
  const double s = scorer.score(f, "fan", "id_00");
  EXPECT_NEAR(s, toy.train_recon, 1e-4 + 1e-3 * toy.train_recon);
  EXPECT_LT(s, 0.05);
  EXPECT_EQ(s, scorer.score(f, "fan", "id_00"));
  EXPECT_THROW(scorer.score(f, "fan", "id_09"), LookupError);
}

TEST(Scorer, RejectsForeignSampleRate) {
  const auto toy = overfit_toy();
  Scorer scorer(toy.ckpt);
  LabeledClip c;
  c.clip_id = "a.wav";
  c.machine_type = "fan";
  c.machine_id = "id_00";
  c.features.values = toy.row.replicate(3, 1);
  c.features.mel_bins = 3;
  c.features.stack = 2;
  c.sample_rate = 16000;
  EXPECT_NO_THROW(scorer.score_clip(c));
  c.sample_rate = 0;
  EXPECT_NO_THROW(scorer.score_clip(c));
  c.sample_rate = 8000;
  EXPECT_THROW(scorer.score_clip(c), ConfigError);
}

TEST(Scorer, NoiseCorruptionRaisesExpectedScore) {
  const auto toy = overfit_toy();
  Scorer scorer(toy.ckpt);
  std::mt19937_64 rng(3);
  double prev = -1.0;
  for (double sigma : {0.0, 0.1, 0.3, 1.0, 3.0}) {
    FeatureMatrix f;
    f.values = toy.row.replicate(400, 1) + testing::random_matrix<float>(400, 6, rng, sigma);
    f.mel_bins = 3;
    f.stack = 2;
    const double s = scorer.score(f, "fan", "id_00");
    EXPECT_GT(s, prev) << "sigma " << sigma;
    prev = s;
  }
}

TEST(Scorer, MaxAggregationBoundsMean) {
  const auto toy = overfit_toy();
  Scorer scorer(toy.ckpt);
  std::mt19937_64 rng(4);
  FeatureMatrix f;
  f.values = testing::random_matrix<float>(10, 6, rng);
  f.mel_bins = 3;
  f.stack = 2;
  EXPECT_GE(scorer.score(f, "fan", "id_00", Aggregation::kMax), scorer.score(f, "fan", "id_00"));
  EXPECT_EQ(scorer.frame_scores(f, "fan", "id_00").size(), 10);
  EXPECT_EQ(scorer.latent_means(f, "fan", "id_00").cols(), 2);
}

TEST(Scorer, SilenceScoresAboveHeldOutNormals) {
  auto spec = default_benchmark_spec();
  SpectrogramConfig fc;
  const auto train_clips = synthesize_clips(spec, SynthSplit::kTrain, {20, 0, 0}, fc);
  const auto stdz = Standardizer::fit(train_clips);
  const auto tax = build_taxonomy(spec);
  const auto data = assemble_training_set(train_clips, tax, ConditionMode::kBoth, stdz);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.mode = ConditionMode::kBoth;
  cfg.seed = 1;
  const auto r = train(data, cfg, initial_checkpoint({}, tax, cfg.mode, fc, spec.sample_rate, stdz, 1));
  Scorer scorer(r.checkpoint);
  const auto test = synthesize_clips(spec, SynthSplit::kTest, {0, 5, 0}, fc);
  Waveform silence;
  silence.samples.assign(static_cast<std::size_t>(spec.clip_seconds * spec.sample_rate), 0.0f);
  const auto silent = extract_features(silence, fc);
  for (const auto& c : test) {
    const double normal = scorer.score_clip(c).score;
    EXPECT_GT(scorer.score(silent, c.machine_type, c.machine_id), normal) << c.clip_id;
  }
}

TEST(LatentCsv, Format) {
  std::ostringstream out;
  write_latent_csv_header(out, 2);
  Matrix<float> mu(2, 2);
  mu << 0.5f, -1.0f, 0.25f, 3.0f;
  write_latent_rows(out, "fan/id_00/normal/x.wav", mu);
  EXPECT_EQ(out.str(),
            "clip_id,frame_index,mu_1,mu_2\nfan/id_00/normal/x.wav,0,0.5,-1\nfan/id_00/normal/x.wav,1,0.25,3\n");
}

}  // namespace
}  // namespace hcvae
