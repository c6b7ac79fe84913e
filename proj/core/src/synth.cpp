#include "hcvae/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hcvae/errors.hpp"
#include "hcvae/features.hpp"

namespace hcvae {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTestNormalSeedBase = 1'000'000;
constexpr std::uint64_t kAnomalySeedBase = 2'000'000;
constexpr double kClankHz = 3000.0;
constexpr double kClankDecaySeconds = 0.02;
constexpr double kClankPeriodSeconds = 0.25;

struct Located {
  std::size_t type_index;
  std::size_t id_index;
  const SynthMachineType* type;
  const SynthId* id;
};

Located locate(const SynthSpec& spec, std::string_view type, std::string_view id) {
  for (std::size_t t = 0; t < spec.machine_types.size(); ++t) {
    const auto& mt = spec.machine_types[t];
    if (mt.name != type) continue;
    for (std::size_t i = 0; i < mt.ids.size(); ++i)
      if (mt.ids[i].name == id) return Located{t, i, &mt, &mt.ids[i]};
    throw LookupError("synth spec has no id '" + std::string(id) + "' for machine type '" + std::string(type) + "'");
  }
  throw LookupError("synth spec has no machine type '" + std::string(type) + "'");
}

std::mt19937_64 clip_rng(const SynthSpec& spec, const Located& at, std::uint64_t clip_seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(at.type_index), static_cast<std::uint32_t>(at.id_index),
                    static_cast<std::uint32_t>(clip_seed), static_cast<std::uint32_t>(clip_seed >> 32), stream};
  return std::mt19937_64(seq);
}

std::string clip_name(ClipLabel label, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%08zu.wav", label == ClipLabel::kNormal ? "normal" : "anomaly", index);
  return buf;
}

std::string label_dir(ClipLabel label) { return label == ClipLabel::kNormal ? "normal" : "abnormal"; }

template <typename Fn>
void for_each_clip(const SynthSpec& spec, SynthSplit split, const SynthCounts& counts, Fn&& fn) {
  for (const auto& mt : spec.machine_types) {
    for (const auto& id : mt.ids) {
      auto emit = [&](ClipLabel label, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::string rel = mt.name + "/" + id.name + "/" + label_dir(label) + "/" + clip_name(label, i);
          fn(mt, id, label, synth_clip_seed(split, label, i), rel);
        }
      };
      if (split == SynthSplit::kTrain) {
        emit(ClipLabel::kNormal, counts.n_normal_train);
      } else {
        emit(ClipLabel::kNormal, counts.n_normal_test);
        emit(ClipLabel::kAnomaly, counts.n_anomaly_test);
      }
    }
  }
}

}  // namespace

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kDetunedHarmonic: return "detuned_harmonic";
    case AnomalyKind::kAddedClank: return "added_clank";
    case AnomalyKind::kBroadbandNoise: return "broadband_noise";
  }
  return "detuned_harmonic";
}

AnomalyKind parse_anomaly_kind(std::string_view text) {
  if (text == "detuned_harmonic") return AnomalyKind::kDetunedHarmonic;
  if (text == "added_clank") return AnomalyKind::kAddedClank;
  if (text == "broadband_noise") return AnomalyKind::kBroadbandNoise;
  throw ConfigError("unknown anomaly_kind '" + std::string(text) +
                    "' (expected detuned_harmonic|added_clank|broadband_noise)");
}

void SynthSpec::validate() const {
  if (machine_types.empty()) throw ConfigError("synth spec lists no machine types");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds must be > 0");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be > 0");
  if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
  if (!(frequency_jitter >= 0.0 && frequency_jitter < 1.0)) throw ConfigError("frequency_jitter must be in [0, 1)");
  if (!(anomaly_strength >= 0.0)) throw ConfigError("anomaly_strength must be >= 0");
  const double nyquist = 0.5 * sample_rate;
  const double detune = anomaly_kind == AnomalyKind::kDetunedHarmonic ? 1.0 + anomaly_strength : 1.0;
  if (anomaly_kind == AnomalyKind::kAddedClank && kClankHz >= nyquist)
    throw ConfigError("sample_rate too low for the clank anomaly");
  std::set<std::string> type_names;
  for (const auto& mt : machine_types) {
    if (mt.name.empty() || !type_names.insert(mt.name).second)
      throw ConfigError("machine type names must be unique and non-empty");
    if (mt.ids.empty()) throw ConfigError("machine type " + mt.name + " lists no ids");
    std::set<std::string> id_names;
    for (const auto& id : mt.ids) {
      if (id.name.empty() || !id_names.insert(id.name).second)
        throw ConfigError("id names must be unique and non-empty within " + mt.name);
      if (id.amplitudes.empty()) throw ConfigError(mt.name + "/" + id.name + " has no harmonic amplitudes");
      const double f0 = mt.base_hz + id.offset_hz;
      if (!(f0 > 0.0)) throw ConfigError(mt.name + "/" + id.name + " has a non-positive fundamental");
      const double top = f0 * static_cast<double>(id.amplitudes.size()) * (1.0 + frequency_jitter) * detune;
      if (!(top < nyquist))
        throw ConfigError(mt.name + "/" + id.name + " harmonics reach " + std::to_string(top) + " Hz, above Nyquist");
    }
  }
}

SynthSpec parse_synth_spec(std::string_view json_text) {
  SynthSpec s;
  try {
    const json j = json::parse(json_text);
    for (const auto& t : j.at("machine_types")) {
      SynthMachineType mt;
      mt.name = t.at("name").get<std::string>();
      mt.base_hz = t.at("base_hz").get<double>();
      for (const auto& i : t.at("ids")) {
        SynthId id;
        id.name = i.at("name").get<std::string>();
        id.offset_hz = i.value("offset_hz", 0.0);
        id.amplitudes = i.at("amplitudes").get<std::vector<double>>();
        mt.ids.push_back(std::move(id));
      }
      s.machine_types.push_back(std::move(mt));
    }
    s.clip_seconds = j.value("clip_seconds", s.clip_seconds);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    s.noise_level = j.value("noise_level", s.noise_level);
    s.frequency_jitter = j.value("frequency_jitter", s.frequency_jitter);
    if (j.contains("anomaly_kind")) s.anomaly_kind = parse_anomaly_kind(j.at("anomaly_kind").get<std::string>());
    s.anomaly_strength = j.value("anomaly_strength", s.anomaly_strength);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid synth spec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synth spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_spec(ss.str());
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json types = json::array();
  for (const auto& mt : spec.machine_types) {
    json ids = json::array();
    for (const auto& id : mt.ids)
      ids.push_back({{"name", id.name}, {"offset_hz", id.offset_hz}, {"amplitudes", id.amplitudes}});
    types.push_back({{"name", mt.name}, {"base_hz", mt.base_hz}, {"ids", ids}});
  }
  const json j{{"machine_types", types},
               {"clip_seconds", spec.clip_seconds},
               {"sample_rate", spec.sample_rate},
               {"noise_level", spec.noise_level},
               {"frequency_jitter", spec.frequency_jitter},
               {"anomaly_kind", std::string(to_string(spec.anomaly_kind))},
               {"anomaly_strength", spec.anomaly_strength},
               {"seed", spec.seed}};
  return j.dump(2);
}

SynthSpec default_benchmark_spec() {
  // A 6% detune moves fan/id_00 onto pump/id_02 and fan/id_02 onto
  // pump/id_00 (same fundamental and harmonic profile), so those anomalies
  // look normal to a model that does not know which machine it hears.
  const std::vector<double> profile_a = {0.30, 0.12, 0.08, 0.04};
  const std::vector<double> profile_b = {0.16, 0.24, 0.04, 0.08};
  SynthSpec s;
  s.machine_types = {
      {"fan", 400.0, {{"id_00", 0.0, profile_a}, {"id_02", 100.0, profile_b}}},
      {"pump", 424.0, {{"id_00", 106.0, profile_b}, {"id_02", 0.0, profile_a}}},
  };
  s.clip_seconds = 2.0;
  s.sample_rate = 16000;
  s.noise_level = 0.01;
  s.frequency_jitter = 0.004;
  s.anomaly_kind = AnomalyKind::kDetunedHarmonic;
  s.anomaly_strength = 0.06;
  s.seed = 2021;
  s.validate();
  return s;
}

Taxonomy build_taxonomy(const SynthSpec& spec) {
  std::vector<Taxonomy::Pair> pairs;
  for (const auto& mt : spec.machine_types)
    for (const auto& id : mt.ids) pairs.emplace_back(mt.name, id.name);
  return Taxonomy::from_pairs(std::move(pairs));
}

Waveform generate_clip(const SynthSpec& spec, std::string_view machine_type, std::string_view machine_id,
                       ClipLabel condition, std::uint64_t clip_seed) {
  const Located at = locate(spec, machine_type, machine_id);
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  const double sr = static_cast<double>(spec.sample_rate);
  const bool anomalous = condition == ClipLabel::kAnomaly;

  std::mt19937_64 rng = clip_rng(spec, at, clip_seed, 0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double f0 = (at.type->base_hz + at.id->offset_hz) * (1.0 + spec.frequency_jitter * unit(rng));
  if (anomalous && spec.anomaly_kind == AnomalyKind::kDetunedHarmonic) f0 *= 1.0 + spec.anomaly_strength;
  std::vector<double> phases(at.id->amplitudes.size());
  for (auto& p : phases) p = phase(rng);

  std::vector<double> signal(n, 0.0);
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double w = 2.0 * std::numbers::pi * f0 * static_cast<double>(k + 1) / sr;
    const double a = at.id->amplitudes[k];
    for (std::size_t i = 0; i < n; ++i) signal[i] += a * std::sin(w * static_cast<double>(i) + phases[k]);
  }
  for (std::size_t i = 0; i < n; ++i) signal[i] += spec.noise_level * gauss(rng);

  if (anomalous && spec.anomaly_kind != AnomalyKind::kDetunedHarmonic) {
    std::mt19937_64 arng = clip_rng(spec, at, clip_seed, 1);
    if (spec.anomaly_kind == AnomalyKind::kBroadbandNoise) {
      for (std::size_t i = 0; i < n; ++i) signal[i] += spec.anomaly_strength * gauss(arng);
    } else {
      std::uniform_real_distribution<double> offset(0.0, kClankPeriodSeconds);
      const double w = 2.0 * std::numbers::pi * kClankHz / sr;
      for (double t0 = offset(arng); t0 < spec.clip_seconds; t0 += kClankPeriodSeconds) {
        const auto start = static_cast<std::size_t>(t0 * sr);
        for (std::size_t i = start; i < n; ++i) {
          const double dt = static_cast<double>(i - start) / sr;
          if (dt > 5.0 * kClankDecaySeconds) break;
          signal[i] += spec.anomaly_strength * std::exp(-dt / kClankDecaySeconds) * std::sin(w * static_cast<double>(i - start));
        }
      }
    }
  }

  Waveform wave;
  wave.sample_rate = spec.sample_rate;
  wave.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) wave.samples[i] = quantize_pcm16(signal[i]);
  return wave;
}

std::uint64_t synth_clip_seed(SynthSplit split, ClipLabel label, std::size_t index) {
  if (split == SynthSplit::kTrain) return index;
  return (label == ClipLabel::kNormal ? kTestNormalSeedBase : kAnomalySeedBase) + index;
}

GeneratedCorpus generate_dataset(const SynthSpec& spec, const std::filesystem::path& root, const SynthCounts& counts) {
  spec.validate();
  GeneratedCorpus out;
  out.train_root = root / "train";
  out.test_root = root / "test";
  for (const auto split : {SynthSplit::kTrain, SynthSplit::kTest}) {
    const auto& split_root = split == SynthSplit::kTrain ? out.train_root : out.test_root;
    for_each_clip(spec, split, counts,
                  [&](const SynthMachineType& mt, const SynthId& id, ClipLabel label, std::uint64_t seed,
                      const std::string& rel) {
                    const auto path = split_root / rel;
                    std::error_code ec;
                    std::filesystem::create_directories(path.parent_path(), ec);
                    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
                    write_wav(path, generate_clip(spec, mt.name, id.name, label, seed));
                    ++out.files_written;
                  });
  }
  return out;
}

std::vector<LabeledClip> synthesize_clips(const SynthSpec& spec, SynthSplit split, const SynthCounts& counts,
                                          const SpectrogramConfig& cfg) {
  spec.validate();
  std::vector<LabeledClip> clips;
  for_each_clip(spec, split, counts,
                [&](const SynthMachineType& mt, const SynthId& id, ClipLabel label, std::uint64_t seed,
                    const std::string& rel) {
                  LabeledClip c;
                  c.clip_id = rel;
                  c.machine_type = mt.name;
                  c.machine_id = id.name;
                  c.label = label;
                  c.sample_rate = spec.sample_rate;
                  c.features = extract_features(generate_clip(spec, mt.name, id.name, label, seed), cfg);
                  clips.push_back(std::move(c));
                });
  std::sort(clips.begin(), clips.end(), [](const LabeledClip& a, const LabeledClip& b) { return a.clip_id < b.clip_id; });
  return clips;
}

}  // namespace hcvae
