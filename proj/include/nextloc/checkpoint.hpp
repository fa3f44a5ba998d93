#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nextloc/tensor.hpp"

namespace nextloc {

// Versioned container of named arrays:
//   magic "NLOCCKPT" | u32 version | u32 count |
//   per array: u32 name_len | name bytes | u32 rank | u64 dims[rank] | f64 values
// All integers and doubles little-endian. Round-trips bit-exactly.
void save_arrays(const std::string& path,
                 const std::vector<std::pair<std::string, const Tensor*>>& arrays);
std::vector<std::pair<std::string, Tensor>> load_arrays(const std::string& path);

}  // namespace nextloc
