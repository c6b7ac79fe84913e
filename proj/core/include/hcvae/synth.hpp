#pragma once

// Deterministic miniature machine-sound corpus: harmonic signatures per
// (machine type, model id) plus white noise, with controllable anomalies.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hcvae/dataset.hpp"
#include "hcvae/taxonomy.hpp"
#include "hcvae/wav.hpp"

namespace hcvae {

enum class AnomalyKind { kDetunedHarmonic, kAddedClank, kBroadbandNoise };

std::string_view to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(std::string_view text);

struct SynthId {
  std::string name;
  double offset_hz = 0.0;
  std::vector<double> amplitudes;  // harmonic k+1 gets amplitudes[k]
};

struct SynthMachineType {
  std::string name;
  double base_hz = 0.0;
  std::vector<SynthId> ids;
};

struct SynthSpec {
  std::vector<SynthMachineType> machine_types;
  double clip_seconds = 10.0;
  int sample_rate = 16000;
  double noise_level = 0.01;
  // Per-clip random relative detuning of the fundamental, uniform in +-jitter.
  double frequency_jitter = 0.0;
  AnomalyKind anomaly_kind = AnomalyKind::kDetunedHarmonic;
  // DetunedHarmonic: relative shift of the fundamental. AddedClank: peak
  // amplitude of the impacts. BroadbandNoise: standard deviation of the
  // added noise.
  double anomaly_strength = 0.05;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string synth_spec_to_json(const SynthSpec& spec);

// Two machine types x two ids whose signatures overlap: a detuned clip of
// one machine lands near the normal signature of another machine.
SynthSpec default_benchmark_spec();

Taxonomy build_taxonomy(const SynthSpec& spec);

Waveform generate_clip(const SynthSpec& spec, std::string_view machine_type, std::string_view machine_id,
                       ClipLabel condition, std::uint64_t clip_seed);

struct SynthCounts {
  std::size_t n_normal_train = 60;
  std::size_t n_normal_test = 20;
  std::size_t n_anomaly_test = 20;
};

enum class SynthSplit { kTrain, kTest };

// Clip seeds are disjoint between the train normals, test normals and test
// anomalies.
std::uint64_t synth_clip_seed(SynthSplit split, ClipLabel label, std::size_t index);

struct GeneratedCorpus {
  std::filesystem::path train_root;  // <root>/train/<type>/<id>/normal/*.wav
  std::filesystem::path test_root;   // <root>/test/<type>/<id>/{normal,abnormal}/*.wav
  std::size_t files_written = 0;
};

GeneratedCorpus generate_dataset(const SynthSpec& spec, const std::filesystem::path& root, const SynthCounts& counts);

// The clips generate_dataset would write for one split, as features, with
// the same clip ids the files would have relative to the split root.
std::vector<LabeledClip> synthesize_clips(const SynthSpec& spec, SynthSplit split, const SynthCounts& counts,
                                          const SpectrogramConfig& cfg);

}  // namespace hcvae
