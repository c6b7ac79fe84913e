#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "hcvae/dataset.hpp"
#include "hcvae/taxonomy.hpp"
#include "hcvae/wav.hpp"
#include "test_util.hpp"

namespace hcvae {
namespace {

namespace fs = std::filesystem;

void touch_wav(const fs::path& p, std::size_t n = 4096) {
  fs::create_directories(p.parent_path());
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(quantize_pcm16(0.1 * std::sin(0.05 * static_cast<double>(i))));
  write_wav(p, w);
}

Taxonomy mimii_dev() {
  std::vector<Taxonomy::Pair> pairs;
  for (const char* t : {"valve", "fan", "slider", "pump"})
    for (const char* i : {"id_06", "id_00", "id_04", "id_02"}) pairs.emplace_back(t, i);
  return Taxonomy::from_pairs(pairs);
}

TEST(Taxonomy, MimiiDevLayoutFromDisk) {
  testing::TempDir dir("tax");
  for (const char* t : {"fan", "pump", "slider", "valve"})
    for (const char* i : {"id_00", "id_02", "id_04", "id_06"})
      touch_wav(dir.path() / t / i / "normal" / "00000000.wav", 1024);
  const auto tax = build_taxonomy(dir.path());
  EXPECT_EQ(tax.level1_labels(), (std::vector<std::string>{"fan", "pump", "slider", "valve"}));
  EXPECT_EQ(tax.level2_labels(), (std::vector<std::string>{"id_00", "id_02", "id_04", "id_06"}));
  EXPECT_EQ(tax, mimii_dev());
}

TEST(Taxonomy, EvaluationIds) {
  const auto tax = Taxonomy::from_pairs({{"fan", "id_05"}, {"fan", "id_01"}, {"pump", "id_03"}});
  EXPECT_EQ(tax.level2_labels(), (std::vector<std::string>{"id_01", "id_03", "id_05"}));
}

TEST(Taxonomy, SingleMachineSingleId) {
  const auto tax = Taxonomy::from_pairs({{"fan", "id_00"}});
  EXPECT_EQ(tax.condition_dim(ConditionMode::kLevel1Only), 1u);
  EXPECT_EQ(tax.condition_dim(ConditionMode::kLevel2Only), 1u);
  EXPECT_EQ(tax.condition_dim(ConditionMode::kBoth), 2u);
  EXPECT_EQ(tax.condition_dim(ConditionMode::kNone), 0u);
}

TEST(Taxonomy, UnknownLabelsThrow) {
  const auto tax = mimii_dev();
  EXPECT_THROW(tax.type_index("drill"), LookupError);
  EXPECT_THROW(tax.id_index("id_01"), LookupError);
  EXPECT_THROW(Taxonomy({"fan"}, {"id_00"}, {{"fan", "id_09"}}), LookupError);
  EXPECT_THROW(Taxonomy({""}, {"id_00"}, {}), ConfigError);
}

TEST(Taxonomy, MergeIsUnion) {
  const auto a = Taxonomy::from_pairs({{"fan", "id_00"}, {"pump", "id_02"}});
  const auto b = Taxonomy::from_pairs({{"fan", "id_01"}, {"valve", "id_03"}});
  const auto m = a.merged_with(b);
  EXPECT_EQ(m.level1_labels(), (std::vector<std::string>{"fan", "pump", "valve"}));
  EXPECT_EQ(m.level2_labels(), (std::vector<std::string>{"id_00", "id_01", "id_02", "id_03"}));
  EXPECT_TRUE(m.contains_pair("valve", "id_03"));
  EXPECT_EQ(m, b.merged_with(a));
}

TEST(ConditionVector, BothModeIndexArithmetic) {
  const auto c = encode_condition(mimii_dev(), "fan", "id_02", ConditionMode::kBoth);
  ASSERT_EQ(c.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(c.values[i], (i == 0 || i == 5) ? 1.0f : 0.0f) << i;
}

TEST(ConditionVector, NoneIsEmpty) {
  EXPECT_EQ(encode_condition(mimii_dev(), "fan", "id_02", ConditionMode::kNone).size(), 0u);
}

TEST(ConditionVector, Level1OnlyIgnoresId) {
  const auto c = encode_condition(mimii_dev(), "pump", "", ConditionMode::kLevel1Only);
  EXPECT_EQ(c.values, (std::vector<float>{0, 1, 0, 0}));
  const auto d = encode_condition(mimii_dev(), "", "id_06", ConditionMode::kLevel2Only);
  EXPECT_EQ(d.values, (std::vector<float>{0, 0, 0, 1}));
  EXPECT_THROW(encode_condition(mimii_dev(), "pump", "id_99", ConditionMode::kBoth), LookupError);
}

TEST(ConditionVector, PropertyExactlyOneHotPerActiveLevel) {
  const auto tax = mimii_dev();
  for (auto mode : {ConditionMode::kNone, ConditionMode::kLevel1Only, ConditionMode::kLevel2Only, ConditionMode::kBoth})
    for (const auto& [t, i] : tax.pairs()) {
      const auto c = encode_condition(tax, t, i, mode);
      ASSERT_EQ(c.size(), tax.condition_dim(mode));
      float sum = 0.0f;
      for (float v : c.values) {
        EXPECT_TRUE(v == 0.0f || v == 1.0f);
        sum += v;
      }
      EXPECT_EQ(sum, static_cast<float>(uses_level1(mode) + uses_level2(mode)));
    }
}

TEST(ConditionMode, ParseRoundTrip) {
  for (auto m : {ConditionMode::kNone, ConditionMode::kLevel1Only, ConditionMode::kLevel2Only, ConditionMode::kBoth})
    EXPECT_EQ(parse_condition_mode(to_string(m)), m);
  EXPECT_THROW(parse_condition_mode("all"), ConfigError);
}

TEST(ScanDataset, ListsSortedClipsWithLabels) {
  testing::TempDir dir("scan");
  touch_wav(dir.path() / "pump/id_02/abnormal/b.wav", 1024);
  touch_wav(dir.path() / "fan/id_00/normal/z.wav", 1024);
  touch_wav(dir.path() / "fan/id_00/normal/a.wav", 1024);
  touch_wav(dir.path() / "pump/id_02/normal/a.wav", 1024);
  std::ofstream(dir.path() / "fan/id_00/normal/notes.txt") << "x";
  fs::create_directories(dir.path() / ".cache");
  const auto e = scan_dataset(dir.path());
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0].clip_id, "fan/id_00/normal/a.wav");
  EXPECT_EQ(e[1].clip_id, "fan/id_00/normal/z.wav");
  EXPECT_EQ(e[2].clip_id, "pump/id_02/abnormal/b.wav");
  EXPECT_EQ(e[2].label, ClipLabel::kAnomaly);
  EXPECT_EQ(e[3].machine_type, "pump");
  EXPECT_EQ(e[3].machine_id, "id_02");
}

TEST(ScanDataset, MalformedTreesRejected) {
  EXPECT_THROW(scan_dataset("/nonexistent/root"), IngestionError);
  testing::TempDir empty("empty");
  EXPECT_THROW(scan_dataset(empty.path()), IngestionError);
  testing::TempDir bad("bad");
  fs::create_directories(bad.path() / "fan/id_00/recordings");
  EXPECT_THROW(scan_dataset(bad.path()), IngestionError);
}

TEST(ScanDataset, TypeWithoutIdLevel) {
  testing::TempDir dir("noid");
  touch_wav(dir.path() / "fan/normal/a.wav", 1024);
  touch_wav(dir.path() / "fan/abnormal/b.wav", 1024);
  touch_wav(dir.path() / "pump/id_00/normal/c.wav", 1024);
  const auto e = scan_dataset(dir.path());
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].clip_id, "fan/abnormal/b.wav");
  EXPECT_EQ(e[0].machine_id, "");
  EXPECT_EQ(e[2].machine_id, "id_00");

  const Taxonomy t = build_taxonomy(dir.path());
  EXPECT_EQ(t.level1_labels(), (std::vector<std::string>{"fan", "pump"}));
  EXPECT_EQ(t.level2_labels(), (std::vector<std::string>{"id_00"}));
  EXPECT_EQ(encode_condition(t, "fan", "", ConditionMode::kLevel1Only).values.size(), 2u);

  EXPECT_NO_THROW(require_labels(e, ConditionMode::kNone));
  EXPECT_NO_THROW(require_labels(e, ConditionMode::kLevel1Only));
  EXPECT_THROW(require_labels(e, ConditionMode::kBoth), ConfigError);
  EXPECT_THROW(require_labels(e, ConditionMode::kLevel2Only), ConfigError);
}

TEST(LoadClip, RecordsSampleRate) {
  testing::TempDir dir("rate");
  touch_wav(dir.path() / "fan/id_00/normal/a.wav", 4096);
  const LabeledClip c = load_clip(scan_dataset(dir.path()).front(), SpectrogramConfig{});
  EXPECT_EQ(c.sample_rate, 16000);
  EXPECT_EQ(c.features.n_vectors(), 3u);
}

LabeledClip clip_with(std::vector<std::vector<float>> rows, ClipLabel label = ClipLabel::kNormal) {
  LabeledClip c;
  c.machine_type = "fan";
  c.machine_id = "id_00";
  c.label = label;
  c.features.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t d = 0; d < rows[r].size(); ++d)
      c.features.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = rows[r][d];
  c.features.mel_bins = rows[0].size();
  c.features.stack = 1;
  return c;
}

TEST(Standardizer, PerDimensionFit) {
  std::vector<LabeledClip> clips = {clip_with({{0, 10}, {4, 10}}), clip_with({{2, 10}, {2, 10}}),
                                    clip_with({{100, 100}}, ClipLabel::kAnomaly)};
  const auto s = Standardizer::fit(clips, Normalization::kPerDimension, 1.0);
  EXPECT_FLOAT_EQ(s.mean[0], 2.0f);
  EXPECT_FLOAT_EQ(s.mean[1], 10.0f);
  EXPECT_FLOAT_EQ(s.scale[0], std::sqrt(2.0f));
  EXPECT_FLOAT_EQ(s.scale[1], 1.0f);  // zero variance floored
}

TEST(Standardizer, GlobalFitSharesOneMeanAndScale) {
  std::vector<LabeledClip> clips = {clip_with({{0, 4}, {0, 4}})};
  const auto s = Standardizer::fit(clips);
  EXPECT_EQ(s.mean, (std::vector<float>{2, 2}));
  EXPECT_EQ(s.scale, (std::vector<float>{2, 2}));
  Matrix<float> m(1, 2);
  m << 0, 4;
  s.apply(m);
  EXPECT_EQ(m(0, 0), -1.0f);
  EXPECT_EQ(m(0, 1), 1.0f);
}

TEST(Standardizer, NeedsNormals) {
  std::vector<LabeledClip> clips = {clip_with({{1, 2}}, ClipLabel::kAnomaly)};
  EXPECT_THROW(Standardizer::fit(clips), IngestionError);
}

TEST(TrainingSet, SkipsAnomaliesAndAttachesConditions) {
  auto a = clip_with({{1, 1}, {2, 2}});
  auto b = clip_with({{3, 3}});
  b.machine_type = "pump";
  b.machine_id = "id_02";
  auto bad = clip_with({{9, 9}}, ClipLabel::kAnomaly);
  const auto tax = Taxonomy::from_pairs({{"fan", "id_00"}, {"pump", "id_02"}});
  const auto set = assemble_training_set({a, b, bad}, tax, ConditionMode::kBoth, Standardizer::identity(2));
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set.conditions.cols(), 4);
  EXPECT_EQ(set.features(2, 0), 3.0f);
  Matrix<float> want(1, 4);
  want << 0, 1, 0, 1;
  EXPECT_EQ(set.conditions.row(2), want);

  b.machine_id = "id_07";
  EXPECT_THROW(assemble_training_set({a, b}, tax, ConditionMode::kBoth, Standardizer::identity(2)), LookupError);
  EXPECT_NO_THROW(assemble_training_set({a, b}, tax, ConditionMode::kLevel1Only, Standardizer::identity(2)));
}

}  // namespace
}  // namespace hcvae
