#include "hcvae/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "hcvae/errors.hpp"
#include "hcvae/wav.hpp"

namespace hcvae {
namespace fs = std::filesystem;

std::string_view to_string(ClipLabel label) { return label == ClipLabel::kNormal ? "normal" : "anomaly"; }

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_wav(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".wav";
}

}  // namespace

namespace {

constexpr std::pair<const char*, ClipLabel> kLabelDirs[] = {{"normal", ClipLabel::kNormal},
                                                           {"abnormal", ClipLabel::kAnomaly}};

// Appends the clips of dir/normal and dir/abnormal; false if neither exists.
bool collect_labeled(const fs::path& root, const fs::path& dir, const std::string& type, const std::string& id,
                     std::vector<ClipEntry>& out) {
  bool any_label_dir = false;
  for (const auto& [sub, label] : kLabelDirs) {
    const fs::path label_dir = dir / sub;
    if (!fs::is_directory(label_dir)) continue;
    any_label_dir = true;
    for (const auto& f : sorted_children(label_dir, false)) {
      if (!is_wav(f)) continue;
      ClipEntry c;
      c.path = f;
      c.clip_id = fs::relative(f, root).generic_string();
      c.machine_type = type;
      c.machine_id = id;
      c.label = label;
      out.push_back(std::move(c));
    }
  }
  return any_label_dir;
}

}  // namespace

std::vector<ClipEntry> scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IngestionError("dataset root " + root.string() + " is not a directory");
  std::vector<ClipEntry> clips;
  for (const auto& type_dir : sorted_children(root, true)) {
    const std::string type = type_dir.filename().string();
    if (collect_labeled(root, type_dir, type, "", clips)) continue;
    const auto id_dirs = sorted_children(type_dir, true);
    if (id_dirs.empty()) throw IngestionError("machine type directory " + type_dir.string() + " has no id directories");
    for (const auto& id_dir : id_dirs)
      if (!collect_labeled(root, id_dir, type, id_dir.filename().string(), clips))
        throw IngestionError("id directory " + id_dir.string() + " has neither normal/ nor abnormal/");
  }
  if (clips.empty()) throw IngestionError("no WAV clips found under " + root.string());
  std::sort(clips.begin(), clips.end(), [](const ClipEntry& a, const ClipEntry& b) { return a.clip_id < b.clip_id; });
  return clips;
}

void require_labels(const std::vector<ClipEntry>& entries, ConditionMode mode) {
  if (!uses_level2(mode)) return;
  for (const auto& e : entries)
    if (e.machine_id.empty())
      throw ConfigError("mode '" + std::string(to_string(mode)) + "' needs model id labels but " + e.clip_id +
                        " has no <id>/ directory");
}

LabeledClip load_clip(const ClipEntry& entry, const SpectrogramConfig& cfg) {
  LabeledClip clip;
  clip.clip_id = entry.clip_id;
  clip.machine_type = entry.machine_type;
  clip.machine_id = entry.machine_id;
  clip.label = entry.label;
  const Waveform wave = read_wav(entry.path);
  clip.sample_rate = wave.sample_rate;
  clip.features = extract_features(wave, cfg);
  return clip;
}

std::vector<LabeledClip> load_clips(const std::vector<ClipEntry>& entries, const SpectrogramConfig& cfg) {
  std::vector<LabeledClip> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_clip(e, cfg));
  return out;
}

Standardizer Standardizer::identity(std::size_t dim) {
  return Standardizer{std::vector<float>(dim, 0.0f), std::vector<float>(dim, 1.0f)};
}

Standardizer Standardizer::fit(const std::vector<LabeledClip>& clips, Normalization mode, double min_scale) {
  std::size_t dim = 0;
  std::size_t rows = 0;
  for (const auto& c : clips) {
    if (c.label != ClipLabel::kNormal) continue;
    if (dim == 0) dim = c.features.dim();
    require_dims(c.features.dim() == dim, "Standardizer::fit: clips have different feature widths");
    rows += c.features.n_vectors();
  }
  if (rows == 0) throw IngestionError("Standardizer::fit: no normal feature rows");

  // Two passes in double: means, then squared deviations.
  std::vector<double> sum(dim, 0.0);
  for (const auto& c : clips) {
    if (c.label != ClipLabel::kNormal) continue;
    const auto& v = c.features.values;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (std::size_t d = 0; d < dim; ++d) sum[d] += v(r, static_cast<Eigen::Index>(d));
  }
  std::vector<double> mean(dim);
  const double n = static_cast<double>(rows);
  if (mode == Normalization::kGlobal) {
    double total = 0.0;
    for (double s : sum) total += s;
    std::fill(mean.begin(), mean.end(), total / (n * static_cast<double>(dim)));
  } else {
    for (std::size_t d = 0; d < dim; ++d) mean[d] = sum[d] / n;
  }

  std::vector<double> sq(dim, 0.0);
  for (const auto& c : clips) {
    if (c.label != ClipLabel::kNormal) continue;
    const auto& v = c.features.values;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (std::size_t d = 0; d < dim; ++d) {
        const double dev = v(r, static_cast<Eigen::Index>(d)) - mean[d];
        sq[d] += dev * dev;
      }
  }
  std::vector<double> var(dim);
  if (mode == Normalization::kGlobal) {
    double total = 0.0;
    for (double s : sq) total += s;
    std::fill(var.begin(), var.end(), total / (n * static_cast<double>(dim)));
  } else {
    for (std::size_t d = 0; d < dim; ++d) var[d] = sq[d] / n;
  }

  Standardizer s;
  s.mean.resize(dim);
  s.scale.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    s.mean[d] = static_cast<float>(mean[d]);
    s.scale[d] = static_cast<float>(std::max(std::sqrt(var[d]), min_scale));
  }
  return s;
}

void Standardizer::apply(Matrix<float>& rows) const {
  require_dims(static_cast<std::size_t>(rows.cols()) == dim(),
               "standardizer width " + std::to_string(dim()) + " != feature width " + std::to_string(rows.cols()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    for (Eigen::Index d = 0; d < rows.cols(); ++d)
      rows(r, d) = (rows(r, d) - mean[static_cast<std::size_t>(d)]) / scale[static_cast<std::size_t>(d)];
}

Matrix<float> condition_rows(const Taxonomy& taxonomy, const std::string& machine_type, const std::string& machine_id,
                             ConditionMode mode, std::size_t n) {
  const ConditionVector c = encode_condition(taxonomy, machine_type, machine_id, mode);
  Matrix<float> out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c.size()));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index k = 0; k < out.cols(); ++k) out(r, k) = c.values[static_cast<std::size_t>(k)];
  return out;
}

TrainingSet assemble_training_set(const std::vector<LabeledClip>& clips, const Taxonomy& taxonomy,
                                  ConditionMode mode, const Standardizer& standardizer) {
  std::size_t rows = 0;
  for (const auto& c : clips) {
    if (c.label != ClipLabel::kNormal) continue;
    require_dims(c.features.dim() == standardizer.dim(), "clip " + c.clip_id + " has feature width " +
                                                             std::to_string(c.features.dim()) + ", expected " +
                                                             std::to_string(standardizer.dim()));
    rows += c.features.n_vectors();
  }
  TrainingSet set;
  const auto cond_dim = static_cast<Eigen::Index>(taxonomy.condition_dim(mode));
  set.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(standardizer.dim()));
  set.conditions.resize(static_cast<Eigen::Index>(rows), cond_dim);
  Eigen::Index at = 0;
  for (const auto& c : clips) {
    if (c.label != ClipLabel::kNormal) continue;
    const auto n = static_cast<Eigen::Index>(c.features.n_vectors());
    set.features.middleRows(at, n) = c.features.values;
    set.conditions.middleRows(at, n) = condition_rows(taxonomy, c.machine_type, c.machine_id, mode, c.features.n_vectors());
    at += n;
  }
  standardizer.apply(set.features);
  return set;
}

}  // namespace hcvae
