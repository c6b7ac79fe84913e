#pragma once

#include <cstddef>

#include "hcvae/linalg.hpp"
#include "hcvae/wav.hpp"

namespace hcvae {

struct SpectrogramConfig {
  std::size_t frame_size = 1024;
  std::size_t hop = 512;
  std::size_t mel_bins = 128;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 selects sample_rate / 2
  double log_floor = 1e-10;
  std::size_t stack = 5;

  double resolved_fmax(int sample_rate) const { return fmax > 0.0 ? fmax : 0.5 * sample_rate; }
  std::size_t fft_bins() const { return frame_size / 2 + 1; }
  std::size_t feature_dim() const { return mel_bins * stack; }

  // Throws ConfigError on an invalid combination.
  void validate(int sample_rate) const;

  bool operator==(const SpectrogramConfig&) const = default;
};

// Stacked log-mel vectors for one clip: one row per model input.
struct FeatureMatrix {
  Matrix<float> values;
  std::size_t mel_bins = 0;
  std::size_t stack = 0;

  std::size_t n_vectors() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::size_t stft_frame_count(std::size_t n_samples, const SpectrogramConfig& cfg);

// Hann-windowed power spectrogram, T x (frame_size / 2 + 1). Trailing
// samples that do not fill a frame are dropped.
Matrix<double> stft_power(const Waveform& wave, const SpectrogramConfig& cfg);

// Triangular mel filters (HTK mel scale), mel_bins x (frame_size / 2 + 1).
Matrix<double> mel_filterbank(const SpectrogramConfig& cfg, int sample_rate);

// 10 * log10(max(power * fb^T, log_floor)), T x mel_bins.
Matrix<double> log_mel(const Matrix<double>& power, const Matrix<double>& filterbank, double log_floor);

FeatureMatrix stack_frames(const Matrix<double>& logmel, std::size_t stack);

// Full pipeline: waveform -> stacked log-mel feature vectors.
FeatureMatrix extract_features(const Waveform& wave, const SpectrogramConfig& cfg);

}  // namespace hcvae
