#include <benchmark/benchmark.h>

#include "falldet/csi/frame.hpp"
#include "falldet/ingest/trace.hpp"
#include "falldet/rng.hpp"

using namespace falldet;

namespace {

std::vector<std::uint8_t> make_trace(std::size_t frames) {
  Rng rng(7);
  std::vector<std::uint8_t> bytes;
  for (std::size_t i = 0; i < frames; ++i) {
    csi::CsiFrame f = csi::CsiFrame::zeros(3, 1, 30);
    for (auto& s : f.csi) s = {double(int(rng.below(256)) - 128), double(int(rng.below(256)) - 128)};
    f.timestamp = double(i) * 0.002;
    f.antenna_sel = 0b100100;
    const auto rec = ingest::pack_csi_record(f);
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  return bytes;
}

void BM_ParseTrace(benchmark::State& state) {
  const auto bytes = make_trace(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ingest::parse_trace(bytes).frames.size());
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ParseTrace)->Arg(1000)->Arg(10000);

}  // namespace
