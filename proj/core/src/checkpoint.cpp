#include "hcvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "hcvae/errors.hpp"

namespace hcvae {
namespace {

using nlohmann::json;

constexpr const char* kMeanTensor = "norm.mean";
constexpr const char* kScaleTensor = "norm.scale";
// Refuse absurd sizes before allocating.
constexpr std::uint64_t kMaxMetadataBytes = 64ull << 20;
constexpr std::uint32_t kMaxNameBytes = 4096;
constexpr std::uint32_t kMaxRank = 8;

[[noreturn]] void fail(CheckpointErrorCode code, const std::string& what) { throw CheckpointError(code, what); }

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::uint64_t n, const char* what) {
    if (n > b_.size() - pos_) fail(CheckpointErrorCode::kTruncated, std::string("checkpoint truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32("tensor data")); }
  std::string str(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

json vae_to_json(const VaeConfig& c) {
  return json{{"input_dim", c.input_dim},       {"hidden_dim", c.hidden_dim}, {"n_hidden_enc", c.n_hidden_enc},
              {"n_hidden_dec", c.n_hidden_dec}, {"latent_dim", c.latent_dim}, {"cond_dim", c.cond_dim},
              {"beta", c.beta}};
}

VaeConfig vae_from_json(const json& j) {
  VaeConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.n_hidden_enc = j.at("n_hidden_enc").get<std::size_t>();
  c.n_hidden_dec = j.at("n_hidden_dec").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.cond_dim = j.at("cond_dim").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  return c;
}

json spectrogram_to_json(const SpectrogramConfig& c) {
  return json{{"frame_size", c.frame_size}, {"hop", c.hop},   {"mel_bins", c.mel_bins}, {"fmin", c.fmin},
              {"fmax", c.fmax},             {"log_floor", c.log_floor}, {"stack", c.stack}};
}

SpectrogramConfig spectrogram_from_json(const json& j) {
  SpectrogramConfig c;
  c.frame_size = j.at("frame_size").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.mel_bins = j.at("mel_bins").get<std::size_t>();
  c.fmin = j.at("fmin").get<double>();
  c.fmax = j.at("fmax").get<double>();
  c.log_floor = j.at("log_floor").get<double>();
  c.stack = j.at("stack").get<std::size_t>();
  return c;
}

json metadata(const Checkpoint& c) {
  json pairs = json::array();
  for (const auto& [t, i] : c.taxonomy.pairs()) pairs.push_back(json::array({t, i}));
  return json{{"format_version", kCheckpointVersion},
              {"vae_config", vae_to_json(c.vae)},
              {"condition_mode", std::string(to_string(c.mode))},
              {"taxonomy", {{"level1", c.taxonomy.level1_labels()}, {"level2", c.taxonomy.level2_labels()}, {"pairs", pairs}}},
              {"spectrogram", spectrogram_to_json(c.spectrogram)},
              {"sample_rate", c.sample_rate},
              {"training", {{"epochs_run", c.training.epochs_run}, {"final_loss", c.training.final_loss}, {"seed", c.training.seed}}}};
}

void write_tensor(Writer& w, const std::string& name, const std::vector<std::size_t>& dims, std::span<const float> data) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u64(d);
  for (float v : data) w.f32(v);
}

struct RawTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;
};

RawTensor read_tensor(Reader& r) {
  RawTensor t;
  const std::uint32_t name_len = r.u32("tensor name length");
  if (name_len > kMaxNameBytes) fail(CheckpointErrorCode::kMalformed, "tensor name length field is implausible");
  t.name = r.str(name_len, "tensor name");
  const std::uint32_t rank = r.u32("tensor rank");
  if (rank > kMaxRank) fail(CheckpointErrorCode::kMalformed, "tensor " + t.name + " has implausible rank");
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = r.u64("tensor dims");
    if (d != 0 && count > (std::uint64_t{1} << 40) / d)
      fail(CheckpointErrorCode::kMalformed, "tensor " + t.name + " dims overflow");
    count *= d;
    t.dims.push_back(static_cast<std::size_t>(d));
  }
  r.need(count * 4, "tensor data");
  t.data.resize(static_cast<std::size_t>(count));
  for (auto& v : t.data) v = r.f32();
  return t;
}

void expect_tensor(const RawTensor& t, const std::string& name, const std::vector<std::size_t>& dims) {
  if (t.name != name) fail(CheckpointErrorCode::kMalformed, "expected tensor " + name + ", found " + t.name);
  if (t.dims != dims) fail(CheckpointErrorCode::kMalformed, "tensor " + name + " has unexpected shape");
}

}  // namespace

void Checkpoint::validate() const {
  vae.validate();
  if (vae.cond_dim != taxonomy.condition_dim(mode))
    throw ConfigError("checkpoint cond_dim " + std::to_string(vae.cond_dim) + " disagrees with taxonomy/mode (" +
                      std::to_string(taxonomy.condition_dim(mode)) + ")");
  if (standardizer.dim() != vae.input_dim || standardizer.scale.size() != vae.input_dim)
    throw ConfigError("standardizer width differs from input_dim");
  if (spectrogram.feature_dim() != vae.input_dim)
    throw ConfigError("input_dim " + std::to_string(vae.input_dim) + " != mel_bins * stack (" +
                      std::to_string(spectrogram.feature_dim()) + ")");
  if (!(params.config == vae)) throw ConfigError("parameter config differs from checkpoint config");
  const auto expected = ModelParams<float>::zeros(vae).tensor_shapes();
  const auto actual = params.tensor_shapes();
  if (expected.size() != actual.size()) throw ConfigError("parameter layout differs from config");
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (expected[i].dims != actual[i].dims) throw ConfigError("tensor " + expected[i].name + " has the wrong shape");
}

Checkpoint initial_checkpoint(VaeConfig architecture, Taxonomy taxonomy, ConditionMode mode,
                              SpectrogramConfig spectrogram, int sample_rate, Standardizer standardizer,
                              std::uint64_t seed) {
  Checkpoint c;
  architecture.cond_dim = taxonomy.condition_dim(mode);
  c.vae = architecture;
  c.taxonomy = std::move(taxonomy);
  c.mode = mode;
  c.spectrogram = spectrogram;
  c.sample_rate = sample_rate;
  c.standardizer = std::move(standardizer);
  c.params = ModelParams<float>::init(architecture, seed);
  c.training.seed = seed;
  c.validate();
  return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.validate();
  Writer w;
  w.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  const std::string meta = metadata(ckpt).dump();
  w.u64(meta.size());
  w.bytes(meta.data(), meta.size());

  const auto shapes = ckpt.params.tensor_shapes();
  const auto tensors = ckpt.params.tensors();
  w.u32(static_cast<std::uint32_t>(shapes.size() + 2));
  for (std::size_t i = 0; i < shapes.size(); ++i) write_tensor(w, shapes[i].name, shapes[i].dims, tensors[i]);
  write_tensor(w, kMeanTensor, {ckpt.standardizer.dim()}, ckpt.standardizer.mean);
  write_tensor(w, kScaleTensor, {ckpt.standardizer.dim()}, ckpt.standardizer.scale);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCheckpointMagic.size()) fail(CheckpointErrorCode::kTruncated, "checkpoint shorter than its magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size() - 1) != 0)
    fail(CheckpointErrorCode::kBadMagic, "not an HCVAE checkpoint (bad magic)");
  if (bytes[kCheckpointMagic.size() - 1] != kCheckpointVersion)
    fail(CheckpointErrorCode::kVersionMismatch,
         "checkpoint format version " + std::to_string(bytes[kCheckpointMagic.size() - 1]) + " is not supported");

  Reader r(bytes.subspan(kCheckpointMagic.size()));
  const std::uint64_t meta_len = r.u64("metadata length");
  if (meta_len > kMaxMetadataBytes) fail(CheckpointErrorCode::kMalformed, "metadata length field is implausible");
  const std::string meta_text = r.str(meta_len, "metadata");

  Checkpoint c;
  try {
    const json meta = json::parse(meta_text);
    if (meta.at("format_version").get<int>() != kCheckpointVersion)
      fail(CheckpointErrorCode::kVersionMismatch, "metadata format_version mismatch");
    c.vae = vae_from_json(meta.at("vae_config"));
    c.mode = parse_condition_mode(meta.at("condition_mode").get<std::string>());
    const auto& tax = meta.at("taxonomy");
    std::vector<Taxonomy::Pair> pairs;
    for (const auto& p : tax.at("pairs")) pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    c.taxonomy = Taxonomy(tax.at("level1").get<std::vector<std::string>>(),
                          tax.at("level2").get<std::vector<std::string>>(), std::move(pairs));
    c.spectrogram = spectrogram_from_json(meta.at("spectrogram"));
    c.sample_rate = meta.at("sample_rate").get<int>();
    const auto& tr = meta.at("training");
    c.training.epochs_run = tr.at("epochs_run").get<std::uint64_t>();
    c.training.final_loss = tr.at("final_loss").get<double>();
    c.training.seed = tr.at("seed").get<std::uint64_t>();
    c.vae.validate();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    fail(CheckpointErrorCode::kMalformed, std::string("checkpoint metadata invalid: ") + e.what());
  }

  c.params = ModelParams<float>::zeros(c.vae);
  const auto shapes = c.params.tensor_shapes();
  const std::uint32_t count = r.u32("tensor count");
  if (count != shapes.size() + 2)
    fail(CheckpointErrorCode::kMalformed, "checkpoint has " + std::to_string(count) + " tensors, expected " +
                                              std::to_string(shapes.size() + 2));
  auto tensors = c.params.tensors();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const RawTensor t = read_tensor(r);
    expect_tensor(t, shapes[i].name, shapes[i].dims);
    std::copy(t.data.begin(), t.data.end(), tensors[i].begin());
  }
  RawTensor mean = read_tensor(r);
  expect_tensor(mean, kMeanTensor, {c.vae.input_dim});
  RawTensor scale = read_tensor(r);
  expect_tensor(scale, kScaleTensor, {c.vae.input_dim});
  c.standardizer.mean = std::move(mean.data);
  c.standardizer.scale = std::move(scale.data);
  if (r.remaining() != 0) fail(CheckpointErrorCode::kMalformed, "trailing bytes after the tensor table");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    fail(CheckpointErrorCode::kMalformed, e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void require_mode(const Checkpoint& ckpt, ConditionMode expected) {
  if (ckpt.mode != expected)
    fail(CheckpointErrorCode::kModeMismatch, "checkpoint was trained with mode " + std::string(to_string(ckpt.mode)) +
                                                 " but mode " + std::string(to_string(expected)) + " was requested");
}

}  // namespace hcvae
