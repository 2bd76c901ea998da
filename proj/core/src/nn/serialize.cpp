#include "falldet/nn/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "falldet/error.hpp"

namespace falldet::nn {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& offset) {
  if (in.size() < offset || in.size() - offset < sizeof(T)) throw ParseError("tensor payload truncated");
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  offset += sizeof(T);
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (double v : t.data()) put_le<double>(out, v);
}

Tensor read_tensor(std::span<const std::uint8_t> in, std::size_t& offset) {
  const auto rank = get_le<std::uint32_t>(in, offset);
  if (rank > 8) throw ParseError("tensor rank " + std::to_string(rank) + " is implausible");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(get_le<std::uint64_t>(in, offset));
    if (d != 0 && count > (in.size() / 8) / d) throw ParseError("tensor dimensions exceed payload size");
    count *= d;
  }
  if ((in.size() - offset) / 8 < count) throw ParseError("tensor payload truncated");
  std::vector<double> data(count);
  for (auto& v : data) v = get_le<double>(in, offset);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace falldet::nn
