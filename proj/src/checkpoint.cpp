#include "mango/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mango {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'N', 'G', 'O', 'C', 'K', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

[[noreturn]] void corrupt(const std::string& why) {
  throw std::runtime_error("corrupt checkpoint: " + why);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) corrupt("truncated u32");
  return v;
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) corrupt("truncated u64");
  return v;
}
std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) corrupt("truncated i64");
  return v;
}
std::string get_str(std::istream& is, std::uint64_t max_len = 1ull << 32) {
  const std::uint64_t n = get_u64(is);
  if (n > max_len) corrupt("string length out of range");
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) corrupt("truncated string");
  return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    os.write(kMagic, sizeof kMagic);
    put_u32(os, 1);  // format version
    put_str(os, data.config_json);
    put_i64(os, data.step);
    put_str(os, data.rng_state);

    put_u32(os, static_cast<std::uint32_t>(data.arrays.size()));
    for (const auto& [name, arr] : data.arrays) {
      put_str(os, name);
      put_u64(os, arr.size());
      os.write(reinterpret_cast<const char*>(arr.data()),
               static_cast<std::streamsize>(arr.size() * sizeof(double)));
    }

    put_u32(os, static_cast<std::uint32_t>(data.tensors.size()));
    for (const auto& [name, t] : data.tensors) {
      put_str(os, name);
      put_u64(os, static_cast<std::uint64_t>(t.rows()));
      put_u64(os, static_cast<std::uint64_t>(t.cols()));
      os.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(static_cast<std::size_t>(t.size()) * sizeof(float)));
    }
    os.flush();
    if (!os) throw std::runtime_error("failed writing checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot finalize checkpoint " + path + ": " + ec.message());
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    corrupt("bad magic in " + path);
  const std::uint32_t version = get_u32(is);
  if (version != 1) corrupt("unsupported format version " + std::to_string(version));

  CheckpointData data;
  data.config_json = get_str(is);
  data.step = get_i64(is);
  data.rng_state = get_str(is);

  const std::uint32_t n_arrays = get_u32(is);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = get_str(is);
    const std::uint64_t n = get_u64(is);
    if (n > (1ull << 32)) corrupt("array too large: " + name);
    std::vector<double> arr(static_cast<std::size_t>(n));
    if (n && !is.read(reinterpret_cast<char*>(arr.data()),
                      static_cast<std::streamsize>(n * sizeof(double))))
      corrupt("truncated array: " + name);
    data.arrays.emplace_back(std::move(name), std::move(arr));
  }

  const std::uint32_t n_tensors = get_u32(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_str(is);
    const std::uint64_t rows = get_u64(is);
    const std::uint64_t cols = get_u64(is);
    if (rows > (1ull << 31) || cols > (1ull << 31) || rows * cols > (1ull << 33))
      corrupt("tensor shape out of range: " + name);
    Eigen::MatrixXf t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (t.size() && !is.read(reinterpret_cast<char*>(t.data()),
                             static_cast<std::streamsize>(static_cast<std::size_t>(t.size()) *
                                                          sizeof(float))))
      corrupt("truncated tensor: " + name);
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  return data;
}

}  // namespace mango
