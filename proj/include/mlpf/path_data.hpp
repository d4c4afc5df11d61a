#pragma once

#include "mlpf/core.hpp"
#include "mlpf/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace mlpf {

enum class GenerationMode : std::uint8_t {
  kPBar = 0,  ///< Y is a standard Brownian motion, independent of the signal.
  kP = 1,     ///< Y generated from a latent Euler path of the signal.
};

/// Upper bound on T * 2^L_data stored increments.
inline constexpr long kMaxStoredIncrements = 1L << 26;

/// Observation increments Y_{(k+1)D} - Y_{kD} at the finest resolution D = 2^-L_data.
///
/// Coarser views are exact left-to-right sums of the finest increments, so
/// every level of a multilevel run consumes the same data path.
class ObservationPath {
 public:
  /// `increments` is obs_dim x (horizon * 2^finest_level).
  ObservationPath(int horizon, int finest_level, int obs_dim, std::uint64_t seed, GenerationMode mode,
                  Eigen::MatrixXd increments);

  int horizon() const { return horizon_; }
  int finest_level() const { return finest_level_; }
  int obs_dim() const { return static_cast<int>(increments_.rows()); }
  std::uint64_t seed() const { return seed_; }
  GenerationMode mode() const { return mode_; }
  const Eigen::MatrixXd& increments() const { return increments_; }

  /// Latent fine-grid signal path (state_dim x (T * 2^L_data + 1)); present for mode p only.
  const std::optional<Eigen::MatrixXd>& latent_states() const { return latent_; }
  void set_latent_states(Eigen::MatrixXd states) { latent_ = std::move(states); }

  /// All increments at level l over [0, T): obs_dim x (T * 2^l).
  Eigen::MatrixXd level_increments(int level) const;

  /// The 2^l increments at level l covering [interval, interval + 1).
  Eigen::MatrixXd increments_at_level(int level, int interval) const;

  friend bool operator==(const ObservationPath& a, const ObservationPath& b);

 private:
  void check_level(int level) const;

  int horizon_;
  int finest_level_;
  std::uint64_t seed_;
  GenerationMode mode_;
  Eigen::MatrixXd increments_;
  std::optional<Eigen::MatrixXd> latent_;
};

ObservationPath simulate_observations(GenerationMode mode, const ModelSpec& model, int horizon, int finest_level,
                                      std::uint64_t seed);

/// Little-endian binary: "MLPFOBS1", u32 T, u32 L_data, u32 d_y, u64 seed, u8 mode, doubles.
void write_path(const ObservationPath& path, const std::filesystem::path& file);
ObservationPath read_path(const std::filesystem::path& file);

/// Inspection export with header `k,component,value`.
void write_path_csv(const ObservationPath& path, const std::filesystem::path& file);

const char* to_string(GenerationMode mode);
GenerationMode parse_generation_mode(std::string_view text);

}  // namespace mlpf
