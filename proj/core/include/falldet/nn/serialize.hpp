#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "falldet/nn/tensor.hpp"

namespace falldet::nn {

// Tensor payload: u32 rank, u64 dims[rank], then rank-product f64 values;
// all little-endian.

void write_tensor(std::vector<std::uint8_t>& out, const Tensor& t);

/// Reads one payload starting at `offset` and advances it. Throws ParseError
/// on truncation or an implausible header.
Tensor read_tensor(std::span<const std::uint8_t> in, std::size_t& offset);

}  // namespace falldet::nn
