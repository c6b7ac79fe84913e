#include "hcvae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "hcvae/errors.hpp"
#include "hcvae/format.hpp"
#include "hcvae/wav.hpp"

namespace hcvae {

AucResult auc(const std::vector<ScoreRecord>& records, const EvalConfig& cfg) {
  std::vector<double> normal;
  std::vector<double> anomaly;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw NumericError("non-finite score for clip " + r.clip_id);
    (r.label == ClipLabel::kNormal ? normal : anomaly).push_back(r.score);
  }
  if (normal.empty() || anomaly.empty())
    throw UndefinedAucError("AUC needs at least one normal and one anomalous clip (got " +
                            std::to_string(normal.size()) + " normal, " + std::to_string(anomaly.size()) +
                            " anomalous)");
  AucResult res;
  res.n_normal = normal.size();
  res.n_anomaly = anomaly.size();
  const double pairs = static_cast<double>(normal.size()) * static_cast<double>(anomaly.size());

  // Thresholded pairwise form. pos - neg is monotone in neg, so over sorted
  // normals the predicate holds on a prefix; the count matches the pair loop
  // exactly, rounding included.
  std::sort(normal.begin(), normal.end());
  std::uint64_t hits = 0;
  for (double pos : anomaly)
    hits += static_cast<std::uint64_t>(
        std::partition_point(normal.begin(), normal.end(), [&](double neg) { return pos - neg >= cfg.eta; }) -
        normal.begin());
  res.auc_pairwise = static_cast<double>(hits) / pairs;

  // Rank-sum form with mid-ranks for ties.
  std::vector<std::pair<double, bool>> all;
  all.reserve(normal.size() + anomaly.size());
  for (double v : normal) all.emplace_back(v, false);
  for (double v : anomaly) all.emplace_back(v, true);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += mid;
    i = j;
  }
  const double n_pos = static_cast<double>(anomaly.size());
  res.auc_rank = (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / pairs;
  return res;
}

Scorer::Scorer(Checkpoint checkpoint) : ckpt_(std::move(checkpoint)) { ckpt_.validate(); }

Scorer::Scorer(Checkpoint checkpoint, ConditionMode expected) : ckpt_(std::move(checkpoint)) {
  require_mode(ckpt_, expected);
  ckpt_.validate();
}

Matrix<float> Scorer::normalized(const FeatureMatrix& features) const {
  if (features.n_vectors() == 0) throw InputTooShortError("clip produced no feature vectors");
  Matrix<float> x = features.values;
  ckpt_.standardizer.apply(x);
  return x;
}

Vector<float> Scorer::frame_scores(const FeatureMatrix& features, const std::string& machine_type,
                                   const std::string& machine_id) const {
  const Matrix<float> x = normalized(features);
  const Matrix<float> c = condition_rows(ckpt_.taxonomy, machine_type, machine_id, ckpt_.mode, features.n_vectors());
  return reconstruction_errors(ckpt_.params, x, c);
}

double Scorer::score(const FeatureMatrix& features, const std::string& machine_type, const std::string& machine_id,
                     Aggregation aggregation) const {
  const Vector<float> s = frame_scores(features, machine_type, machine_id);
  if (aggregation == Aggregation::kMax) return static_cast<double>(s.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) sum += static_cast<double>(s(i));
  return sum / static_cast<double>(s.size());
}

void Scorer::require_rate(int sample_rate) const {
  if (sample_rate != 0 && sample_rate != ckpt_.sample_rate)
    throw ConfigError("clip sample rate " + std::to_string(sample_rate) + " Hz differs from the model's " +
                      std::to_string(ckpt_.sample_rate) + " Hz");
}

ScoreRecord Scorer::score_clip(const LabeledClip& clip, Aggregation aggregation) const {
  require_rate(clip.sample_rate);
  return ScoreRecord{clip.clip_id, clip.machine_type, clip.machine_id,
                     score(clip.features, clip.machine_type, clip.machine_id, aggregation), clip.label};
}

ScoreRecord Scorer::score_wav(const std::filesystem::path& wav, const std::string& machine_type,
                              const std::string& machine_id, Aggregation aggregation) const {
  const Waveform w = read_wav(wav);
  require_rate(w.sample_rate);
  const FeatureMatrix f = extract_features(w, ckpt_.spectrogram);
  return ScoreRecord{wav.filename().string(), machine_type, machine_id, score(f, machine_type, machine_id, aggregation),
                     ClipLabel::kNormal};
}

Matrix<float> Scorer::latent_means(const FeatureMatrix& features, const std::string& machine_type,
                                   const std::string& machine_id) const {
  const Matrix<float> x = normalized(features);
  const Matrix<float> c = condition_rows(ckpt_.taxonomy, machine_type, machine_id, ckpt_.mode, features.n_vectors());
  return encode(ckpt_.params, x, c).mu;
}

EvaluationReport summarize_scores(std::vector<ScoreRecord> records, const EvalConfig& cfg) {
  EvaluationReport report;
  std::map<std::pair<std::string, std::string>, std::vector<ScoreRecord>> groups;
  for (const auto& r : records) groups[{r.machine_type, r.machine_id}].push_back(r);
  double sum_pairwise = 0.0;
  double sum_rank = 0.0;
  for (const auto& [key, recs] : groups) {
    GroupAuc g;
    g.machine_type = key.first;
    g.machine_id = key.second;
    for (const auto& r : recs) (r.label == ClipLabel::kNormal ? g.n_normal : g.n_anomaly)++;
    if (g.n_normal > 0 && g.n_anomaly > 0) {
      g.result = auc(recs, cfg);
      sum_pairwise += g.result->auc_pairwise;
      sum_rank += g.result->auc_rank;
      ++report.defined_groups;
    }
    report.groups.push_back(std::move(g));
  }
  if (report.defined_groups > 0) {
    report.macro_auc_pairwise = sum_pairwise / static_cast<double>(report.defined_groups);
    report.macro_auc_rank = sum_rank / static_cast<double>(report.defined_groups);
  }
  std::sort(records.begin(), records.end(),
            [](const ScoreRecord& a, const ScoreRecord& b) { return a.clip_id < b.clip_id; });
  report.scores = std::move(records);
  return report;
}

EvaluationReport evaluate_clips(const Scorer& scorer, const std::vector<LabeledClip>& clips, const EvalConfig& cfg) {
  std::vector<ScoreRecord> records;
  records.reserve(clips.size());
  for (const auto& c : clips) records.push_back(scorer.score_clip(c, cfg.aggregation));
  return summarize_scores(std::move(records), cfg);
}

EvaluationReport evaluate_dataset(const Scorer& scorer, const std::filesystem::path& test_root, const EvalConfig& cfg) {
  std::vector<ScoreRecord> records;
  for (const auto& entry : scan_dataset(test_root)) {
    const LabeledClip clip = load_clip(entry, scorer.checkpoint().spectrogram);
    records.push_back(scorer.score_clip(clip, cfg.aggregation));
  }
  return summarize_scores(std::move(records), cfg);
}

void write_scores_csv(std::ostream& out, const std::vector<ScoreRecord>& records) {
  out << "clip_id,machine_type,machine_id,label,score\n";
  for (const auto& r : records)
    out << r.clip_id << ',' << r.machine_type << ',' << r.machine_id << ',' << to_string(r.label) << ','
        << format_real(r.score) << '\n';
}

void write_auc_csv(std::ostream& out, const EvaluationReport& report) {
  out << "machine_type,machine_id,n_normal,n_anomaly,auc_pairwise,auc_rank\n";
  for (const auto& g : report.groups) {
    out << g.machine_type << ',' << g.machine_id << ',' << g.n_normal << ',' << g.n_anomaly << ',';
    if (g.result) out << format_real(g.result->auc_pairwise) << ',' << format_real(g.result->auc_rank);
    else out << ',';
    out << '\n';
  }
}

void write_latent_csv_header(std::ostream& out, std::size_t latent_dim) {
  out << "clip_id,frame_index";
  for (std::size_t i = 1; i <= latent_dim; ++i) out << ",mu_" << i;
  out << '\n';
}

void write_latent_rows(std::ostream& out, const std::string& clip_id, const Matrix<float>& mu) {
  for (Eigen::Index r = 0; r < mu.rows(); ++r) {
    out << clip_id << ',' << r;
    for (Eigen::Index k = 0; k < mu.cols(); ++k) out << ',' << format_real(mu(r, k));
    out << '\n';
  }
}

}  // namespace hcvae
