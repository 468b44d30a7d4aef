#pragma once

// Deterministic random source. Every consumer (dataset sampling, patch
// extraction, weight init, noise, ...) owns an Rng derived from (seed, stream)
// so results are reproducible regardless of call interleaving elsewhere.
// Distribution code is written out by hand: the standard library does not
// pin down the output of std::uniform_*_distribution across implementations,
// and checkpoint resume needs bit-identical draws.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mango {

// splitmix64; used to decorrelate (seed, stream) pairs before seeding the engine.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  // Independent stream for a named consumer under one experiment seed.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix64(seed) ^ mix64(stream_id + 0x517cc1b727220a95ULL));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1), 53 random bits.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Inclusive integer range.
  long long uniform_int(long long lo, long long hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: empty range");
    return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Standard normal via polar Box-Muller; the spare is part of the
  // serialized state so resumed runs continue the exact sequence.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * unit() - 1.0;
      v = 2.0 * unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double k = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * k;
    has_spare_ = true;
    return u * k;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // First k entries of a partial Fisher-Yates pass: a uniform sample of k
  // distinct indices from [0, n).
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n)
      throw std::invalid_argument("Rng::sample_without_replacement: k out of range");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Full state round-trip (mt19937_64 text format plus the Box-Muller spare).
  std::string serialize() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::hexfloat << spare_;
    return os.str();
  }

  static Rng deserialize(const std::string& s) {
    Rng r;
    std::istringstream is(s);
    int has_spare = 0;
    is >> r.engine_ >> has_spare;
    std::string spare_hex;
    is >> spare_hex;
    if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed state");
    r.has_spare_ = has_spare != 0;
    r.spare_ = spare_hex.empty() ? 0.0 : std::strtod(spare_hex.c_str(), nullptr);
    return r;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids for the named consumers of the experiment seed.
namespace rng_stream {
constexpr std::uint64_t kWeightInit = 1;
constexpr std::uint64_t kBatch = 2;
constexpr std::uint64_t kFeatureIndices = 3;
constexpr std::uint64_t kSegnceIndices = 4;
constexpr std::uint64_t kPatchesD = 5;
constexpr std::uint64_t kPatchesG = 6;
constexpr std::uint64_t kSceneGen = 7;
constexpr std::uint64_t kEmbedder = 8;
constexpr std::uint64_t kDiversityPairs = 9;
}  // namespace rng_stream

}  // namespace mango
