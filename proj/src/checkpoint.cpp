#include "vadasr/checkpoint.hpp"

#include <limits>

#include "vadasr/binary_io.hpp"
#include "vadasr/error.hpp"

namespace vadasr {

std::vector<char> encode_tensors(const TensorMap& tensors) {
  binary::Writer w;
  w.bytes("TNSR");
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvalidArgument("tensor name too long: " + name.substr(0, 32) + "...");
    if (t.rank() > std::numeric_limits<std::uint8_t>::max())
      throw InvalidArgument("tensor '" + name + "' rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  return w.buffer();
}

TensorMap decode_tensors(const std::vector<char>& bytes) {
  binary::Reader r(bytes, "checkpoint");
  if (r.bytes(4) != "TNSR") throw FormatError("checkpoint: bad magic, expected TNSR");
  const std::uint32_t count = r.u32();
  TensorMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string name = r.bytes(len);
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    const std::size_t n = shape_size(shape);
    r.need(n * 8);
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    if (!out.emplace(name, Tensor(shape, std::move(data))).second)
      throw FormatError("checkpoint: duplicate tensor '" + name + "'");
  }
  if (r.remaining() != 0)
    throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  return out;
}

void save_tensors(const std::string& path, const TensorMap& tensors) {
  binary::write_file(path, encode_tensors(tensors));
}

TensorMap load_tensors(const std::string& path) {
  return decode_tensors(binary::read_file(path));
}

}  // namespace vadasr
