#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace mlpf {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// SplitMix64 finalizer; a bijection on 64-bit integers.
std::uint64_t splitmix64(std::uint64_t x);

/// Folds a tag into a seed. Order matters: derive_seed(s, a, b) != derive_seed(s, b, a).
inline std::uint64_t derive_seed(std::uint64_t seed) { return seed; }

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  return derive_seed(splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

enum class StreamPurpose : std::uint32_t {
  kPropagation = 1,
  kResampling = 2,
  kDataSignal = 3,
  kDataObservation = 4,
  kTest = 15,
};

/// Counter-based stream of uniforms and standard normals.
///
/// The stream is a pure function of (seed, purpose, level, index, interval), so
/// particle i at unit interval p always sees the same draws no matter which
/// thread, or in which order, it is propagated.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamPurpose purpose, std::uint32_t level, std::uint32_t index,
                std::uint32_t interval);

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();

  double gaussian();

  double operator()() { return uniform(); }

  /// Fills `out` with i.i.d. N(0, scale^2) entries, column by column.
  template <typename Derived>
  void fill_gaussian(const Eigen::MatrixBase<Derived>& out, double scale) {
    auto& dst = const_cast<Eigen::MatrixBase<Derived>&>(out);
    for (Eigen::Index j = 0; j < dst.cols(); ++j) {
      for (Eigen::Index i = 0; i < dst.rows(); ++i) {
        dst(i, j) = scale * gaussian();
      }
    }
  }

 private:
  void refill();

  PhiloxKey key_;
  PhiloxCounter base_;
  std::uint32_t block_ = 0;
  PhiloxCounter buffer_{};
  int consumed_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mlpf
