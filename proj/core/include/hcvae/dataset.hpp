#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hcvae/features.hpp"
#include "hcvae/linalg.hpp"
#include "hcvae/taxonomy.hpp"

namespace hcvae {

enum class ClipLabel { kNormal, kAnomaly };

std::string_view to_string(ClipLabel label);

struct ClipEntry {
  std::filesystem::path path;
  std::string clip_id;  // path relative to the dataset root, '/' separated
  std::string machine_type;
  std::string machine_id;  // empty for a <type>/<normal|abnormal>/ tree
  ClipLabel label = ClipLabel::kNormal;
};

// Lists every *.wav under <root>/<machine_type>/<id>/<normal|abnormal>/,
// sorted by clip_id. A type directory holding normal/ or abnormal/ directly
// has no id level; its clips get an empty machine_id. Throws IngestionError
// for a missing or empty root and for an id directory that has neither
// normal/ nor abnormal/.
std::vector<ClipEntry> scan_dataset(const std::filesystem::path& root);

// Throws ConfigError when mode conditions on model ids and some clip has
// none.
void require_labels(const std::vector<ClipEntry>& entries, ConditionMode mode);

// One clip's features together with its taxonomy labels.
struct LabeledClip {
  std::string clip_id;
  std::string machine_type;
  std::string machine_id;
  ClipLabel label = ClipLabel::kNormal;
  int sample_rate = 0;  // of the source audio; 0 when unknown
  FeatureMatrix features;
};

LabeledClip load_clip(const ClipEntry& entry, const SpectrogramConfig& cfg);
std::vector<LabeledClip> load_clips(const std::vector<ClipEntry>& entries, const SpectrogramConfig& cfg);

enum class Normalization {
  kGlobal,        // one mean and one scale over every feature value
  kPerDimension,  // mean and scale per feature dimension
};

// Affine normalization fitted on the normal training features:
// x' = (x - mean) / scale, with scale = max(std, min_scale). Stored per
// dimension either way so checkpoints do not depend on the fitting mode.
struct Standardizer {
  std::vector<float> mean;
  std::vector<float> scale;

  static constexpr double kDefaultMinScale = 1.0;

  static Standardizer identity(std::size_t dim);
  static Standardizer fit(const std::vector<LabeledClip>& clips, Normalization mode = Normalization::kGlobal,
                          double min_scale = kDefaultMinScale);

  std::size_t dim() const { return mean.size(); }
  void apply(Matrix<float>& rows) const;
  bool operator==(const Standardizer&) const = default;
};

// Model-ready rows: normalized features and the matching condition rows.
struct TrainingSet {
  Matrix<float> features;
  Matrix<float> conditions;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

// Stacks the normal clips of the list (anomalies are skipped). Throws
// LookupError when a label is missing from the taxonomy for an active level.
TrainingSet assemble_training_set(const std::vector<LabeledClip>& clips, const Taxonomy& taxonomy,
                                  ConditionMode mode, const Standardizer& standardizer);

// Condition rows for one clip, repeated n times.
Matrix<float> condition_rows(const Taxonomy& taxonomy, const std::string& machine_type, const std::string& machine_id,
                             ConditionMode mode, std::size_t n);

}  // namespace hcvae
