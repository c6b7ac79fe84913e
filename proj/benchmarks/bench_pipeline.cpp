#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "hcvae/evaluation.hpp"
#include "hcvae/features.hpp"
#include "hcvae/synth.hpp"

namespace {

hcvae::Waveform ten_second_clip() {
  const hcvae::SynthSpec spec = [] {
    auto s = hcvae::default_benchmark_spec();
    s.clip_seconds = 10.0;
    return s;
  }();
  return hcvae::generate_clip(spec, "fan", "id_00", hcvae::ClipLabel::kNormal, 1);
}

void BM_ExtractFeatures10s(benchmark::State& state) {
  const hcvae::Waveform w = ten_second_clip();
  const hcvae::SpectrogramConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(hcvae::extract_features(w, cfg));
}
BENCHMARK(BM_ExtractFeatures10s)->Unit(benchmark::kMillisecond);

void BM_GenerateClip10s(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ten_second_clip());
}
BENCHMARK(BM_GenerateClip10s)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<hcvae::ScoreRecord> records;
  for (std::size_t i = 0; i < n; ++i)
    records.push_back({"c", "t", "i", std::sin(static_cast<double>(i)),
                       i % 2 == 0 ? hcvae::ClipLabel::kNormal : hcvae::ClipLabel::kAnomaly});
  for (auto _ : state) benchmark::DoNotOptimize(hcvae::auc(records));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

}  // namespace
