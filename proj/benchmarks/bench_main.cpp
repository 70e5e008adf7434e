#include <benchmark/benchmark.h>

#include <random>

#include "wafer/autoencoder.hpp"
#include "wafer/cnn.hpp"
#include "wafer/features.hpp"
#include "wafer/metrics.hpp"
#include "wafer/synthgen.hpp"

namespace {

using namespace wafer;

std::vector<EncodedTensor> batch(std::size_t n) {
  std::vector<EncodedTensor> xs;
  for (std::size_t i = 0; i < n; ++i) {
    xs.push_back(one_hot_encode(generate(static_cast<DefectClass>(i % kNumClasses), SynthParams{}, i)));
  }
  return xs;
}

void BM_Generate(benchmark::State& st) {
  std::uint64_t seed = 0;
  for (auto _ : st) benchmark::DoNotOptimize(generate(DefectClass::scratch, SynthParams{}, seed++));
}
BENCHMARK(BM_Generate);

void BM_Extract59(benchmark::State& st) {
  const auto m = generate(DefectClass::donut, SynthParams{}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(extract_59(m));
}
BENCHMARK(BM_Extract59)->Unit(benchmark::kMicrosecond);

void BM_AutoencoderRoundTrip(benchmark::State& st) {
  auto ae = Autoencoder::create(1);
  const auto x = batch(1).front();
  for (auto _ : st) benchmark::DoNotOptimize(ae.decode(ae.encode(x)));
}
BENCHMARK(BM_AutoencoderRoundTrip)->Unit(benchmark::kMicrosecond);

void BM_CnnPredict(benchmark::State& st) {
  const bool paper = st.range(1) != 0;
  auto m = build_cnn(CnnVariant::full, paper ? CnnWidths::paper() : CnnWidths::desk(), 1);
  const auto xs = batch(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(m.predict_proba(xs));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_CnnPredict)->Args({32, 0})->Args({8, 1})->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& st) {
  std::mt19937_64 gen(1);
  std::vector<double> s(static_cast<std::size_t>(st.range(0)));
  std::vector<int> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<double>(gen() % 1000);
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : st) benchmark::DoNotOptimize(roc_auc(s, y));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace
