#include "hcvae/features.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <fftw3.h>

namespace hcvae {
namespace {

// FFTW planning is not thread safe; execution with a private plan is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(std::size_t k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

void SpectrogramConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (frame_size < 2) throw ConfigError("frame_size must be at least 2");
  if (hop == 0 || hop > frame_size) throw ConfigError("hop must satisfy 0 < hop <= frame_size");
  if (mel_bins < 1) throw ConfigError("mel_bins must be >= 1");
  if (stack < 1) throw ConfigError("stack must be >= 1");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  const double hi = resolved_fmax(sample_rate);
  if (fmin < 0.0 || !(fmin < hi)) throw ConfigError("need 0 <= fmin < fmax");
  if (hi > 0.5 * sample_rate + 1e-9) throw ConfigError("fmax exceeds the Nyquist frequency");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t stft_frame_count(std::size_t n_samples, const SpectrogramConfig& cfg) {
  if (n_samples < cfg.frame_size) return 0;
  return (n_samples - cfg.frame_size) / cfg.hop + 1;
}

Matrix<double> stft_power(const Waveform& wave, const SpectrogramConfig& cfg) {
  cfg.validate(wave.sample_rate);
  const std::size_t n = cfg.frame_size;
  const std::size_t frames = stft_frame_count(wave.samples.size(), cfg);
  if (frames == 0)
    throw InputTooShortError("clip has " + std::to_string(wave.samples.size()) +
                             " samples, fewer than one frame of " + std::to_string(n));

  // Periodic Hann window.
  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));

  RealFft fft(n);
  const std::size_t bins = cfg.fft_bins();
  Matrix<double> power(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  for (std::size_t t = 0; t < frames; ++t) {
    const float* frame = wave.samples.data() + t * cfg.hop;
    double* in = fft.input();
    for (std::size_t i = 0; i < n; ++i) in[i] = static_cast<double>(frame[i]) * window[i];
    fft.execute();
    for (std::size_t k = 0; k < bins; ++k) power(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = fft.power(k);
  }
  return power;
}

Matrix<double> mel_filterbank(const SpectrogramConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const std::size_t bins = cfg.fft_bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.resolved_fmax(sample_rate));
  const std::size_t points = cfg.mel_bins + 2;
  std::vector<double> edges(points);
  for (std::size_t i = 0; i < points; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(points - 1));

  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(cfg.frame_size);
  Matrix<double> fb = Matrix<double>::Zero(static_cast<Eigen::Index>(cfg.mel_bins), static_cast<Eigen::Index>(bins));
  for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w;
    }
    // FFT bins rarely land on the center; rescale the sampled triangle to unit peak.
    const double peak = fb.row(static_cast<Eigen::Index>(m)).maxCoeff();
    if (!(peak > 0.0))
      throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce mel_bins or raise frame_size");
    fb.row(static_cast<Eigen::Index>(m)) /= peak;
  }
  return fb;
}

Matrix<double> log_mel(const Matrix<double>& power, const Matrix<double>& filterbank, double log_floor) {
  require_dims(power.cols() == filterbank.cols(), "log_mel: power has " + std::to_string(power.cols()) +
                                                      " bins, filterbank expects " + std::to_string(filterbank.cols()));
  Matrix<double> mel(power.rows(), filterbank.rows());
  mel.noalias() = power * filterbank.transpose();
  return mel.unaryExpr([log_floor](double v) { return 10.0 * std::log10(std::max(v, log_floor)); });
}

FeatureMatrix stack_frames(const Matrix<double>& logmel, std::size_t stack) {
  if (stack < 1) throw ConfigError("stack must be >= 1");
  const auto frames = static_cast<std::size_t>(logmel.rows());
  if (frames < stack)
    throw InputTooShortError("need at least " + std::to_string(stack) + " frames to stack, got " +
                             std::to_string(frames));
  const Eigen::Index mel = logmel.cols();
  const auto n = static_cast<Eigen::Index>(frames - stack + 1);
  FeatureMatrix out;
  out.mel_bins = static_cast<std::size_t>(mel);
  out.stack = stack;
  out.values.resize(n, mel * static_cast<Eigen::Index>(stack));
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(stack); ++s)
      out.values.row(t).segment(s * mel, mel) = logmel.row(t + s).cast<float>();
  return out;
}

FeatureMatrix extract_features(const Waveform& wave, const SpectrogramConfig& cfg) {
  const Matrix<double> power = stft_power(wave, cfg);
  const Matrix<double> fb = mel_filterbank(cfg, wave.sample_rate);
  return stack_frames(log_mel(power, fb, cfg.log_floor), cfg.stack);
}

}  // namespace hcvae
