#pragma once

// Versioned binary container for a trained model.
//
//   bytes 0..7   magic "HCVAE\0\0" followed by the format version byte (1)
//   u64          metadata length N (little endian)
//   N bytes      UTF-8 JSON: configs, taxonomy, condition mode, training info
//   u32          tensor count
//   per tensor   u32 name length, name, u32 rank, rank x u64 dims,
//                prod(dims) x little-endian float32
//
// The file must end exactly after the last tensor.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hcvae/dataset.hpp"
#include "hcvae/features.hpp"
#include "hcvae/taxonomy.hpp"
#include "hcvae/vae.hpp"

namespace hcvae {

inline constexpr std::uint8_t kCheckpointVersion = 1;
inline constexpr std::array<std::uint8_t, 8> kCheckpointMagic = {'H', 'C', 'V', 'A', 'E', 0, 0, kCheckpointVersion};

struct TrainingMetadata {
  std::uint64_t epochs_run = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  VaeConfig vae;
  Taxonomy taxonomy;
  ConditionMode mode = ConditionMode::kNone;
  SpectrogramConfig spectrogram;
  int sample_rate = 16000;
  Standardizer standardizer;
  ModelParams<float> params;
  TrainingMetadata training;

  // Throws ConfigError when the parts disagree (cond_dim vs taxonomy and
  // mode, standardizer width vs input_dim, parameter shapes vs config).
  void validate() const;
  bool operator==(const Checkpoint&) const = default;
};

// Fresh model with seeded weights; cond_dim follows taxonomy and mode.
Checkpoint initial_checkpoint(VaeConfig architecture, Taxonomy taxonomy, ConditionMode mode,
                              SpectrogramConfig spectrogram, int sample_rate, Standardizer standardizer,
                              std::uint64_t seed);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws CheckpointError(kModeMismatch) unless ckpt.mode == expected.
void require_mode(const Checkpoint& ckpt, ConditionMode expected);

}  // namespace hcvae
