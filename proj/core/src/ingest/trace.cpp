#include "falldet/ingest/trace.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

namespace falldet::ingest {
namespace {

std::uint16_t read_le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t read_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void write_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

// Receive-antenna permutation from the 2-bit fields of antenna_sel.
// Returns identity when the fields do not form a permutation of [0, n_rx).
std::array<std::size_t, 3> decode_permutation(std::uint8_t antenna_sel, std::size_t n_rx) {
  std::array<std::size_t, 3> perm{0, 1, 2};
  std::array<bool, 3> seen{};
  std::array<std::size_t, 3> raw{};
  for (std::size_t i = 0; i < n_rx; ++i) {
    raw[i] = (antenna_sel >> (2 * i)) & 0x3;
    if (raw[i] >= n_rx || seen[raw[i]]) return perm;
    seen[raw[i]] = true;
  }
  for (std::size_t i = 0; i < n_rx; ++i) perm[i] = raw[i];
  return perm;
}

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> blob) : blob_(blob) {}

  // Signed 8-bit value starting at bit `index`; bytes past the blob read as 0.
  std::int8_t read8(std::size_t index) const {
    const std::size_t byte = index / 8;
    const unsigned shift = index % 8;
    unsigned v = at(byte) >> shift;
    if (shift != 0) v |= static_cast<unsigned>(at(byte + 1)) << (8 - shift);
    return static_cast<std::int8_t>(static_cast<std::uint8_t>(v & 0xff));
  }

 private:
  std::uint8_t at(std::size_t i) const { return i < blob_.size() ? blob_[i] : 0; }
  std::span<const std::uint8_t> blob_;
};

void write8(std::vector<std::uint8_t>& blob, std::size_t index, std::int8_t value) {
  const auto v = static_cast<std::uint8_t>(value);
  const std::size_t byte = index / 8;
  const unsigned shift = index % 8;
  blob[byte] = static_cast<std::uint8_t>(blob[byte] | (v << shift));
  if (shift != 0) blob[byte + 1] = static_cast<std::uint8_t>(blob[byte + 1] | (v >> (8 - shift)));
}

struct TimestampUnwrapper {
  std::uint64_t wraps = 0;
  std::uint32_t last = 0;
  bool first = true;

  double operator()(std::uint32_t low) {
    if (!first && low < last) ++wraps;
    first = false;
    last = low;
    return static_cast<double>((wraps << 32) | low) * 1e-6;
  }
};

// Decodes one CSI payload (everything after the code byte).
csi::CsiFrame decode_csi(std::span<const std::uint8_t> payload, std::size_t offset, TimestampUnwrapper& clock) {
  if (payload.size() < kCsiHeaderBytes) throw TraceError("CSI payload shorter than its 20-byte header", offset);
  const std::uint8_t* p = payload.data();
  const std::size_t n_rx = p[8];
  const std::size_t n_tx = p[9];
  if (n_rx < 1 || n_rx > 3 || n_tx < 1 || n_tx > 3) {
    throw TraceError("antenna counts " + std::to_string(n_rx) + "x" + std::to_string(n_tx) + " out of range",
                     offset);
  }
  const std::size_t blob_len = read_le16(p + 16);
  const std::size_t expected = expected_blob_length(n_rx, n_tx);
  if (blob_len != expected || payload.size() != kCsiHeaderBytes + expected) {
    throw TraceError("CSI payload length " + std::to_string(payload.size() - kCsiHeaderBytes) + " (declared " +
                         std::to_string(blob_len) + ") inconsistent with " + std::to_string(n_rx) + "x" +
                         std::to_string(n_tx) + " antennas, expected " + std::to_string(expected),
                     offset);
  }

  csi::CsiFrame f = csi::CsiFrame::zeros(n_rx, n_tx, kTraceSubcarriers);
  f.timestamp = clock(read_le32(p));
  f.bfee_count = read_le16(p + 4);
  f.rssi = {p[10], p[11], p[12]};
  f.noise_floor = static_cast<std::int8_t>(p[13]);
  f.agc = p[14];
  f.antenna_sel = p[15];
  f.rate = read_le16(p + 18);

  const auto perm = decode_permutation(f.antenna_sel, n_rx);
  const BitReader bits(payload.subspan(kCsiHeaderBytes));
  std::size_t index = 0;
  for (std::size_t s = 0; s < kTraceSubcarriers; ++s) {
    index += 3;
    for (std::size_t r = 0; r < n_rx; ++r) {
      for (std::size_t t = 0; t < n_tx; ++t) {
        const double re = bits.read8(index);
        const double im = bits.read8(index + 8);
        f.at(perm[r], t, s) = {re, im};
        index += 16;
      }
    }
  }
  return f;
}

}  // namespace

TraceParseResult parse_trace(std::span<const std::uint8_t> bytes, const TraceParseOptions& options) {
  TraceParseResult result;
  TimestampUnwrapper clock;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 2) break;
    const std::size_t len = (static_cast<std::size_t>(bytes[pos]) << 8) | bytes[pos + 1];
    if (bytes.size() - pos - 2 < len) break;
    const std::size_t record_offset = pos;
    pos += 2 + len;
    result.bytes_consumed = pos;

    if (len == 0) {
      if (options.strict) throw TraceError("zero-length record has no code byte", record_offset);
      ++result.malformed_records;
      continue;
    }
    const std::uint8_t code = bytes[record_offset + 2];
    if (code != kCsiRecordCode) {
      ++result.skipped_records;
      continue;
    }
    try {
      result.frames.push_back(decode_csi(bytes.subspan(record_offset + 3, len - 1), record_offset, clock));
    } catch (const TraceError&) {
      if (options.strict) throw;
      ++result.malformed_records;
    }
  }
  if (result.bytes_consumed < bytes.size()) {
    result.dropped_tail_bytes = bytes.size() - result.bytes_consumed;
    result.truncated_records = 1;
  }
  return result;
}

TraceParseResult read_trace_file(const std::filesystem::path& path, const TraceParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trace file", path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_trace(bytes, options);
}

std::vector<std::uint8_t> pack_record(std::uint8_t code, std::span<const std::uint8_t> payload) {
  const std::size_t len = payload.size() + 1;
  if (len > 0xffff) throw ConfigError("record payload exceeds 65534 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(2 + len);
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len & 0xff));
  out.push_back(code);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> pack_csi_record(const csi::CsiFrame& frame) {
  frame.validate();
  if (frame.n_sub != kTraceSubcarriers) throw ConfigError("trace records carry exactly 30 subcarriers");
  auto to_i8 = [](double v) {
    if (v != std::trunc(v) || v < -128.0 || v > 127.0) {
      throw ConfigError("CSI component " + std::to_string(v) + " is not representable as int8");
    }
    return static_cast<std::int8_t>(v);
  };
  auto to_u8 = [](int v, const char* what) {
    if (v < 0 || v > 255) throw ConfigError(std::string(what) + " out of u8 range");
    return static_cast<std::uint8_t>(v);
  };
  if (frame.noise_floor < -128 || frame.noise_floor > 127) throw ConfigError("noise floor out of i8 range");

  const std::size_t blob_len = expected_blob_length(frame.n_rx, frame.n_tx);
  std::vector<std::uint8_t> payload;
  payload.reserve(kCsiHeaderBytes + blob_len);
  const auto micros = static_cast<std::uint64_t>(std::llround(frame.timestamp * 1e6));
  write_le32(payload, static_cast<std::uint32_t>(micros & 0xffffffffu));
  write_le16(payload, frame.bfee_count);
  write_le16(payload, 0);  // reserved
  payload.push_back(static_cast<std::uint8_t>(frame.n_rx));
  payload.push_back(static_cast<std::uint8_t>(frame.n_tx));
  payload.push_back(to_u8(frame.rssi[0], "rssi_a"));
  payload.push_back(to_u8(frame.rssi[1], "rssi_b"));
  payload.push_back(to_u8(frame.rssi[2], "rssi_c"));
  payload.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(frame.noise_floor)));
  payload.push_back(to_u8(frame.agc, "agc"));
  payload.push_back(frame.antenna_sel);
  write_le16(payload, static_cast<std::uint16_t>(blob_len));
  write_le16(payload, frame.rate);

  const auto perm = decode_permutation(frame.antenna_sel, frame.n_rx);
  std::vector<std::uint8_t> blob(blob_len, 0);
  std::size_t index = 0;
  for (std::size_t s = 0; s < kTraceSubcarriers; ++s) {
    index += 3;
    for (std::size_t r = 0; r < frame.n_rx; ++r) {
      for (std::size_t t = 0; t < frame.n_tx; ++t) {
        const auto& v = frame.at(perm[r], t, s);
        write8(blob, index, to_i8(v.real()));
        write8(blob, index + 8, to_i8(v.imag()));
        index += 16;
      }
    }
  }
  payload.insert(payload.end(), blob.begin(), blob.end());
  return pack_record(kCsiRecordCode, payload);
}

csi::CsiFrame scale_csi(const csi::CsiFrame& frame) {
  auto dbinv = [](double x) { return std::pow(10.0, x / 10.0); };
  double rssi_mag = 0.0;
  for (int r : frame.rssi) {
    if (r != 0) rssi_mag += dbinv(r);
  }
  double csi_pwr = 0.0;
  for (const auto& s : frame.csi) csi_pwr += std::norm(s);
  if (rssi_mag <= 0.0 || csi_pwr <= 0.0) throw ConfigError("cannot scale CSI without RSSI and non-zero CSI power");

  const double total_rss = 10.0 * std::log10(rssi_mag) - 44.0 - frame.agc;
  const double rssi_pwr = dbinv(total_rss);

  const double scale = rssi_pwr / (csi_pwr / static_cast<double>(frame.n_sub));

  const double noise_db = frame.noise_floor == csi::kNoiseUnknown ? -92.0 : frame.noise_floor;
  const double thermal = dbinv(noise_db);
  const double quant = scale * static_cast<double>(frame.n_rx * frame.n_tx);
  double factor = std::sqrt(scale / (thermal + quant));
  if (frame.n_tx == 2) factor *= std::sqrt(2.0);
  if (frame.n_tx == 3) factor *= std::sqrt(dbinv(4.5));

  csi::CsiFrame out = frame;
  for (auto& s : out.csi) s *= factor;
  return out;
}

}  // namespace falldet::ingest
