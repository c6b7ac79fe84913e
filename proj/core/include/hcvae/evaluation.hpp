#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hcvae/checkpoint.hpp"
#include "hcvae/dataset.hpp"

namespace hcvae {

struct ScoreRecord {
  std::string clip_id;
  std::string machine_type;
  std::string machine_id;
  double score = 0.0;
  ClipLabel label = ClipLabel::kNormal;
};

enum class Aggregation { kMean, kMax };

struct EvalConfig {
  double eta = 0.0;
  Aggregation aggregation = Aggregation::kMean;
};

struct AucResult {
  double auc_pairwise = 0.0;  // (1 / (N- N+)) sum_ij H(A(x+_j) - A(x-_i)), H(u) = [u >= eta]
  double auc_rank = 0.0;   // Mann-Whitney, ties count one half
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
};

// Throws UndefinedAucError unless both classes are present.
AucResult auc(const std::vector<ScoreRecord>& records, const EvalConfig& cfg = {});

// Scores clips with a trained model. Scoring uses the posterior mean, so it
// is deterministic and safe to call concurrently.
class Scorer {
 public:
  explicit Scorer(Checkpoint checkpoint);
  // Rejects a checkpoint whose condition mode differs from expected.
  Scorer(Checkpoint checkpoint, ConditionMode expected);

  const Checkpoint& checkpoint() const { return ckpt_; }

  // Per-vector reconstruction errors of the normalized features.
  Vector<float> frame_scores(const FeatureMatrix& features, const std::string& machine_type,
                             const std::string& machine_id) const;
  double score(const FeatureMatrix& features, const std::string& machine_type, const std::string& machine_id,
               Aggregation aggregation = Aggregation::kMean) const;
  // Both throw ConfigError for audio at a sample rate other than the model's.
  ScoreRecord score_clip(const LabeledClip& clip, Aggregation aggregation = Aggregation::kMean) const;
  ScoreRecord score_wav(const std::filesystem::path& wav, const std::string& machine_type,
                        const std::string& machine_id, Aggregation aggregation = Aggregation::kMean) const;

  // Posterior means, one row per feature vector.
  Matrix<float> latent_means(const FeatureMatrix& features, const std::string& machine_type,
                             const std::string& machine_id) const;

 private:
  Matrix<float> normalized(const FeatureMatrix& features) const;
  void require_rate(int sample_rate) const;

  Checkpoint ckpt_;
};

struct GroupAuc {
  std::string machine_type;
  std::string machine_id;
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
  std::optional<AucResult> result;  // empty when a class is missing
};

struct EvaluationReport {
  std::vector<ScoreRecord> scores;
  std::vector<GroupAuc> groups;  // sorted by (machine_type, machine_id)
  double macro_auc_pairwise = 0.0;
  double macro_auc_rank = 0.0;
  std::size_t defined_groups = 0;
};

// Groups records by (type, id) and computes both AUCs per group plus their
// macro average over the groups where AUC is defined.
EvaluationReport summarize_scores(std::vector<ScoreRecord> records, const EvalConfig& cfg);

EvaluationReport evaluate_clips(const Scorer& scorer, const std::vector<LabeledClip>& clips, const EvalConfig& cfg);
EvaluationReport evaluate_dataset(const Scorer& scorer, const std::filesystem::path& test_root, const EvalConfig& cfg);

// "clip_id,machine_type,machine_id,label,score"
void write_scores_csv(std::ostream& out, const std::vector<ScoreRecord>& records);
// "machine_type,machine_id,n_normal,n_anomaly,auc_pairwise,auc_rank"; undefined
// groups leave both AUC fields empty.
void write_auc_csv(std::ostream& out, const EvaluationReport& report);
// "clip_id,frame_index,mu_1..mu_L"
void write_latent_csv_header(std::ostream& out, std::size_t latent_dim);
void write_latent_rows(std::ostream& out, const std::string& clip_id, const Matrix<float>& mu);

}  // namespace hcvae
