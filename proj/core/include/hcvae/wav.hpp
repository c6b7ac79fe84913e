#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hcvae {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1)
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// PCM 16-bit RIFF/WAVE. Multi-channel files yield channel 0. Throws WavError.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(std::span<const std::uint8_t> bytes);

// Writes mono PCM 16-bit; samples are clamped to [-1, 1] and rounded to the
// nearest 1/32768 step.
void write_wav(const std::filesystem::path& path, const Waveform& wave);
std::vector<std::uint8_t> encode_wav(const Waveform& wave);

// Rounds a sample to the value it will have after a PCM16 round trip.
float quantize_pcm16(double sample);

}  // namespace hcvae
