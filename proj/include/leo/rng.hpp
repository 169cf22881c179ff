#pragma once

#include <cstdint>
#include <random>

#include "leo/linalg.hpp"

namespace leo {

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded generator bound to a (seed, stream id) pair. Identical pairs yield identical
/// sample sequences; distinct stream ids give independent-looking streams, so each Monte
/// Carlo trial owns one stream derived from the master seed and its index.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), engine_(mix64(mix64(seed) ^ mix64(~stream_id))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream; used to give sub-tasks of one trial their own sequence.
  RngStream substream(std::uint64_t child) const { return RngStream(mix64(seed_ ^ mix64(stream_id_)), child); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  std::uint64_t next_u64() { return engine_(); }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
    Matrix m(rows, cols);
    // Fill row-major so the sample order matches the serialized layout.
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(0.0, stddev);
    return m;
  }

  Vector normal_vector(Eigen::Index size, double stddev = 1.0) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal(0.0, stddev);
    return v;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace leo
