#include "nextloc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "nextloc/types.hpp"

namespace nextloc {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'O', 'C', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

// This codebase targets little-endian hosts; the writers below memcpy raw
// representations and would need byte swaps elsewhere.
template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), "checkpoint: truncated file");
  return v;
}

}  // namespace

void save_arrays(const std::string& path,
                 const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "checkpoint: cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint32_t>(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t->rank()));
    for (int i = 0; i < t->rank(); ++i) write_pod<uint64_t>(os, static_cast<uint64_t>(t->dim(i)));
    os.write(reinterpret_cast<const char*>(t->data().data()),
             static_cast<std::streamsize>(t->data().size() * sizeof(double)));
  }
  require(static_cast<bool>(os), "checkpoint: write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_arrays(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "checkpoint: cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  require(static_cast<bool>(is) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "checkpoint: bad magic in " + path);
  const uint32_t version = read_pod<uint32_t>(is);
  require(version == kVersion, "checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = read_pod<uint32_t>(is);
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (uint32_t a = 0; a < count; ++a) {
    const uint32_t name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = read_pod<uint32_t>(is);
    std::vector<int64_t> shape(rank);
    int64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int64_t>(read_pod<uint64_t>(is));
      numel *= shape[i];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    require(static_cast<bool>(is), "checkpoint: truncated array " + name);
    out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace nextloc
