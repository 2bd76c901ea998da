#include <algorithm>
#include <map>
#include <set>

#include "cli.hpp"
#include "falldet/csi/frame.hpp"
#include "falldet/ingest/synth.hpp"
#include "falldet/ingest/trace.hpp"

namespace falldet::cli {

namespace {

struct InspectArgs {
  std::filesystem::path trace;
  bool lenient = false;
  bool scaled = false;
};

Json trace_stats(const ingest::TraceParseResult& r, bool scaled) {
  Json j;
  j["frames"] = r.frames.size();
  j["skipped_records"] = r.skipped_records;
  j["malformed_records"] = r.malformed_records;
  j["truncated_records"] = r.truncated_records;
  j["bytes_consumed"] = r.bytes_consumed;
  j["dropped_tail_bytes"] = r.dropped_tail_bytes;
  if (r.frames.empty()) return j;

  std::set<std::size_t> rx, tx;
  double amp_sum = 0.0, agc_sum = 0.0;
  std::size_t amp_n = 0;
  std::array<double, 3> rssi{};
  for (const auto& f : r.frames) {
    rx.insert(f.n_rx);
    tx.insert(f.n_tx);
    const auto a = csi::amplitude(scaled ? ingest::scale_csi(f) : f);
    for (double v : a) amp_sum += v;
    amp_n += a.size();
    for (std::size_t i = 0; i < 3; ++i) rssi[i] += f.rssi[i];
    agc_sum += f.agc;
  }
  const double n = static_cast<double>(r.frames.size());
  const double span = r.frames.back().timestamp - r.frames.front().timestamp;
  auto join = [](const std::set<std::size_t>& s) {
    std::string out;
    for (auto v : s) out += (out.empty() ? "" : "|") + std::to_string(v);
    return out;
  };
  j["n_rx"] = join(rx);
  j["n_tx"] = join(tx);
  j["n_sub"] = r.frames.front().n_sub;
  j["first_timestamp_s"] = r.frames.front().timestamp;
  j["duration_s"] = span;
  j["frame_rate_hz"] = span > 0.0 ? (n - 1.0) / span : 0.0;
  j["mean_amplitude"] = amp_n ? amp_sum / static_cast<double>(amp_n) : 0.0;
  j["amplitude_scaled"] = scaled;
  j["mean_rssi_a"] = rssi[0] / n;
  j["mean_rssi_b"] = rssi[1] / n;
  j["mean_rssi_c"] = rssi[2] / n;
  j["mean_agc"] = agc_sum / n;
  return j;
}

struct SynthArgs {
  std::filesystem::path spec;
};

}  // namespace

void add_data_commands(CLI::App& app, Globals& g, Action& action) {
  auto ia = std::make_shared<InspectArgs>();
  auto* inspect = app.add_subcommand("inspect-trace", "parse a binary CSI trace and print frame statistics");
  inspect->add_option("trace", ia->trace, "trace file")->required();
  inspect->add_flag("--lenient", ia->lenient, "skip malformed CSI records instead of failing");
  inspect->add_flag("--scaled", ia->scaled, "report absolute-scaled amplitudes (RSSI/AGC)");
  inspect->callback([&g, &action, ia] {
    action = [&g, ia] {
      ingest::TraceParseOptions opt;
      opt.strict = !ia->lenient;
      const auto r = ingest::read_trace_file(ia->trace, opt);
      const Json j = trace_stats(r, ia->scaled);
      if (const auto dir = out_dir(g, false, "inspect-trace"); !dir.empty()) {
        write_text(dir / "trace_stats.json", j.dump(2) + "\n");
      }
      emit(g, j);
      return kOk;
    };
  });

  auto sa = std::make_shared<SynthArgs>();
  auto* synth = app.add_subcommand("synth", "generate a labelled synthetic CSI dataset");
  synth->add_option("--spec", sa->spec, "synthesis spec (JSON)")->required();
  synth->callback([&g, &action, sa] {
    action = [&g, sa] {
      ingest::SynthSpec spec = ingest::read_synth_spec(sa->spec);
      if (g.seed) spec.seed = *g.seed;
      const auto dir = out_dir(g, true, "synth");
      const auto ds = ingest::synth_dataset(spec);
      ingest::write_dataset(ds, dir);
      Json j;
      j["out"] = dir.string();
      j["seed"] = spec.seed;
      j["instances"] = ds.windows.size();
      j["samples_per_instance"] = spec.samples_per_instance();
      j["sample_rate"] = spec.sample_rate;
      j["n_features"] = spec.n_rx * spec.n_tx * spec.n_sub;
      Json classes;
      for (const auto& [name, count] : spec.classes) classes[name] = count;
      j["classes"] = classes;
      emit(g, j);
      return kOk;
    };
  });
}

}  // namespace falldet::cli
