#pragma once

#include <map>
#include <string>
#include <vector>

#include "vadasr/tensor.hpp"

namespace vadasr {

using TensorMap = std::map<std::string, Tensor>;

// "TNSR" | u32 count | per tensor: u16 name length, name, u8 rank,
// u32 dims[rank], f64 data[...]; everything little-endian.
std::vector<char> encode_tensors(const TensorMap& tensors);
TensorMap decode_tensors(const std::vector<char>& bytes);

void save_tensors(const std::string& path, const TensorMap& tensors);
TensorMap load_tensors(const std::string& path);

}  // namespace vadasr
