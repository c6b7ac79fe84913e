#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "hcvae/dataset.hpp"
#include "hcvae/features.hpp"
#include "hcvae/synth.hpp"
#include "test_util.hpp"

namespace hcvae {
namespace {

namespace fs = std::filesystem;

SynthSpec tone_spec() {
  SynthSpec s;
  s.machine_types = {{"fan", 1000.0, {{"id_00", 0.0, {0.5}}}}};
  s.clip_seconds = 1.0;
  s.noise_level = 0.0;
  s.seed = 1;
  return s;
}

Eigen::Index dominant_bin(const Waveform& w) {
  const auto p = stft_power(w, {});
  const Eigen::VectorXd mean = p.colwise().mean().transpose();
  Eigen::Index arg = 0;
  mean.maxCoeff(&arg);
  return arg;
}

TEST(Synth, PureToneLandsOnBin64) {
  const auto w = generate_clip(tone_spec(), "fan", "id_00", ClipLabel::kNormal, 0);
  EXPECT_EQ(w.samples.size(), 16000u);
  const auto p = stft_power(w, {});
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    Eigen::Index arg = 0;
    p.row(t).maxCoeff(&arg);
    EXPECT_EQ(arg, 64);
  }
}

TEST(Synth, SameSeedsBitIdentical) {
  const auto spec = default_benchmark_spec();
  const auto a = generate_clip(spec, "pump", "id_02", ClipLabel::kAnomaly, 5);
  EXPECT_EQ(a.samples, generate_clip(spec, "pump", "id_02", ClipLabel::kAnomaly, 5).samples);
  EXPECT_NE(a.samples, generate_clip(spec, "pump", "id_02", ClipLabel::kAnomaly, 6).samples);
}

TEST(Synth, ZeroStrengthAnomalyEqualsNormal) {
  for (auto kind : {AnomalyKind::kDetunedHarmonic, AnomalyKind::kAddedClank, AnomalyKind::kBroadbandNoise}) {
    auto spec = default_benchmark_spec();
    spec.anomaly_kind = kind;
    spec.anomaly_strength = 0.0;
    EXPECT_EQ(generate_clip(spec, "fan", "id_00", ClipLabel::kAnomaly, 3).samples,
              generate_clip(spec, "fan", "id_00", ClipLabel::kNormal, 3).samples)
        << to_string(kind);
  }
}

TEST(Synth, AnomaliesDifferFromNormals) {
  for (auto kind : {AnomalyKind::kDetunedHarmonic, AnomalyKind::kAddedClank, AnomalyKind::kBroadbandNoise}) {
    auto spec = default_benchmark_spec();
    spec.anomaly_kind = kind;
    spec.anomaly_strength = 0.1;
    const auto n = stft_power(generate_clip(spec, "fan", "id_02", ClipLabel::kNormal, 3), {});
    const auto a = stft_power(generate_clip(spec, "fan", "id_02", ClipLabel::kAnomaly, 3), {});
    EXPECT_GT((a - n).cwiseAbs().maxCoeff(), 1.0) << to_string(kind);
  }
}

TEST(Synth, PairsHaveDistinctDominantBins) {
  auto spec = default_benchmark_spec();
  spec.noise_level = 0.0;
  spec.frequency_jitter = 0.0;
  std::set<Eigen::Index> bins;
  std::size_t pairs = 0;
  for (const auto& t : spec.machine_types)
    for (const auto& id : t.ids) {
      bins.insert(dominant_bin(generate_clip(spec, t.name, id.name, ClipLabel::kNormal, 0)));
      ++pairs;
    }
  EXPECT_EQ(bins.size(), pairs);
}

TEST(Synth, UnknownLabelAndBadSpec) {
  EXPECT_THROW(generate_clip(tone_spec(), "drill", "id_00", ClipLabel::kNormal, 0), LookupError);
  EXPECT_THROW(generate_clip(tone_spec(), "fan", "id_01", ClipLabel::kNormal, 0), LookupError);
  auto s = tone_spec();
  s.machine_types[0].base_hz = 9000.0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_synth_spec("{\"machine_types\": 3}"), ConfigError);
  EXPECT_THROW(parse_anomaly_kind("rattle"), ConfigError);
}

TEST(Synth, SpecJsonRoundTrip) {
  const auto spec = default_benchmark_spec();
  const auto back = parse_synth_spec(synth_spec_to_json(spec));
  EXPECT_EQ(synth_spec_to_json(back), synth_spec_to_json(spec));
  EXPECT_EQ(build_taxonomy(back), build_taxonomy(spec));
}

TEST(SynthSeeds, SplitsAreDisjoint) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) {
    seen.insert(synth_clip_seed(SynthSplit::kTrain, ClipLabel::kNormal, i));
    seen.insert(synth_clip_seed(SynthSplit::kTest, ClipLabel::kNormal, i));
    seen.insert(synth_clip_seed(SynthSplit::kTest, ClipLabel::kAnomaly, i));
  }
  EXPECT_EQ(seen.size(), 3000u);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(GenerateDataset, CountsLayoutAndRoundTrip) {
  testing::TempDir dir("synth");
  auto spec = default_benchmark_spec();
  spec.clip_seconds = 0.25;
  const auto g = generate_dataset(spec, dir.path(), {20, 5, 5});
  EXPECT_EQ(g.files_written, 2u * 2u * 30u);
  std::size_t wavs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 120u);

  const auto train = scan_dataset(g.train_root);
  const auto test = scan_dataset(g.test_root);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(test.size(), 40u);
  for (const auto& e : train) EXPECT_EQ(e.label, ClipLabel::kNormal);
  std::size_t anomalies = 0;
  for (const auto& e : test) anomalies += e.label == ClipLabel::kAnomaly;
  EXPECT_EQ(anomalies, 20u);
  EXPECT_TRUE(fs::is_directory(g.test_root / "fan" / "id_00" / "abnormal"));
  EXPECT_EQ(build_taxonomy(g.train_root), build_taxonomy(spec));
  EXPECT_EQ(build_taxonomy(g.test_root), build_taxonomy(spec));

  // In-memory clips match the files.
  const auto mem = synthesize_clips(spec, SynthSplit::kTest, {20, 5, 5}, {});
  ASSERT_EQ(mem.size(), test.size());
  for (std::size_t i = 0; i < mem.size(); i += 7) {
    EXPECT_EQ(mem[i].clip_id, test[i].clip_id);
    EXPECT_EQ(mem[i].features.values, load_clip(test[i], {}).features.values);
  }

  testing::TempDir again("synth2");
  generate_dataset(spec, again.path(), {20, 5, 5});
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir.path());
    EXPECT_EQ(slurp(e.path()), slurp(again.path() / rel)) << rel;
  }
}

}  // namespace
}  // namespace hcvae
