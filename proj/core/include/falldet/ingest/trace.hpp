#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "falldet/csi/frame.hpp"
#include "falldet/error.hpp"

namespace falldet::ingest {

// Record framing of the reference NIC trace format:
//   [u16 big-endian length][u8 code][length-1 payload bytes]
// A CSI ("beamforming feedback") record has code 0xBB and a payload of
// 20 little-endian header bytes followed by a bit-packed CSI blob.
inline constexpr std::uint8_t kCsiRecordCode = 0xBB;
inline constexpr std::size_t kTraceSubcarriers = 30;
inline constexpr std::size_t kCsiHeaderBytes = 20;

/// Malformed trace record. `offset` is the byte offset of the record's
/// length field within the stream.
class TraceError : public ParseError {
 public:
  TraceError(const std::string& what, std::size_t offset)
      : ParseError(what + " (record at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

struct TraceParseOptions {
  /// Strict mode throws TraceError on a malformed CSI record; lenient
  /// mode skips it and counts it in `malformed_records`.
  bool strict = true;
};

struct TraceParseResult {
  std::vector<csi::CsiFrame> frames;
  std::size_t skipped_records = 0;    // well-formed records with a non-CSI code
  std::size_t malformed_records = 0;  // lenient mode only
  std::size_t truncated_records = 0;  // trailing partial record (0 or 1)
  std::size_t bytes_consumed = 0;     // complete records, including skipped ones
  std::size_t dropped_tail_bytes = 0; // bytes of the truncated trailing record
};

/// Length in bytes of the bit-packed CSI blob for the given antenna counts.
constexpr std::size_t expected_blob_length(std::size_t n_rx, std::size_t n_tx) noexcept {
  return (kTraceSubcarriers * (n_rx * n_tx * 16 + 3) + 7) / 8;
}

TraceParseResult parse_trace(std::span<const std::uint8_t> bytes, const TraceParseOptions& options = {});

/// Reads the whole file and parses it. Throws ParseError if unreadable.
TraceParseResult read_trace_file(const std::filesystem::path& path, const TraceParseOptions& options = {});

/// Frames an arbitrary record.
std::vector<std::uint8_t> pack_record(std::uint8_t code, std::span<const std::uint8_t> payload);

/// Encodes a frame as a complete CSI record (length + code + payload).
/// The frame must have 30 subcarriers and integral CSI components in
/// [-128, 127]; its antenna_sel permutation is honoured.
std::vector<std::uint8_t> pack_csi_record(const csi::CsiFrame& frame);

/// Absolute-scale CSI using RSSI, AGC and noise floor (linear-power
/// scaling of the public tool). Unknown noise floor is treated as -92 dBm.
csi::CsiFrame scale_csi(const csi::CsiFrame& frame);

}  // namespace falldet::ingest
