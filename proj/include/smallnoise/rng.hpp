#pragma once

#include <cstdint>
#include <random>

namespace smallnoise {

/// SplitMix64 finalizer; used to derive independent engine seeds.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

/// Per-replicate random stream. (base_seed, stream_id) fully determines the output:
/// the engine is std::mt19937_64 (sequence fixed by the standard) and the normal and
/// exponential transforms are computed here rather than by <random> distributions,
/// whose algorithms are implementation-defined.
class SeededRng {
 public:
  SeededRng(std::uint64_t base_seed, std::uint64_t stream_id);

  [[nodiscard]] std::uint64_t base_seed() const { return base_seed_; }
  [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Exponential with the given rate.
  double exponential(double rate);

 private:
  std::uint64_t base_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace smallnoise
