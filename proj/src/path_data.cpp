#include "mlpf/path_data.hpp"

#include "mlpf/rng.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace mlpf {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'L', 'P', 'F', 'O', 'B', 'S', '1'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 4 + 8 + 1;

long checked_length(int horizon, int finest_level) {
  if (horizon < 1) throw InvalidArgument("observation path: horizon T must be >= 1");
  if (finest_level < 0 || finest_level > 30) throw InvalidArgument("observation path: invalid finest level");
  const long n = static_cast<long>(horizon) << finest_level;
  if (n > kMaxStoredIncrements || (n >> finest_level) != horizon) {
    throw InvalidArgument("observation path: T * 2^L_data = " + std::to_string(n) + " exceeds the configured maximum " +
                          std::to_string(kMaxStoredIncrements));
  }
  return n;
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(value >> (8 * i)));
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

}  // namespace

ObservationPath::ObservationPath(int horizon, int finest_level, int obs_dim, std::uint64_t seed, GenerationMode mode,
                                 Eigen::MatrixXd increments)
    : horizon_(horizon), finest_level_(finest_level), seed_(seed), mode_(mode), increments_(std::move(increments)) {
  const long n = checked_length(horizon, finest_level);
  if (obs_dim < 1 || obs_dim > kMaxDim) throw InvalidArgument("observation path: invalid observation dimension");
  if (increments_.rows() != obs_dim || increments_.cols() != n) {
    throw InvalidArgument("observation path: expected " + std::to_string(obs_dim) + " x " + std::to_string(n) +
                          " increments, got " + std::to_string(increments_.rows()) + " x " +
                          std::to_string(increments_.cols()));
  }
}

void ObservationPath::check_level(int level) const {
  if (level < 0) throw InvalidArgument("observation path: negative level");
  if (level > finest_level_) {
    throw FrequencyExceeded("level " + std::to_string(level) + " exceeds the data frequency (finest level " +
                            std::to_string(finest_level_) + ")");
  }
}

Eigen::MatrixXd ObservationPath::level_increments(int level) const {
  check_level(level);
  if (level == finest_level_) return increments_;
  const long ratio = 1L << (finest_level_ - level);
  const long n = static_cast<long>(horizon_) << level;
  Eigen::MatrixXd out(increments_.rows(), n);
  for (long j = 0; j < n; ++j) {
    for (Eigen::Index c = 0; c < increments_.rows(); ++c) {
      double sum = increments_(c, j * ratio);
      for (long k = 1; k < ratio; ++k) sum += increments_(c, j * ratio + k);
      out(c, j) = sum;
    }
  }
  return out;
}

Eigen::MatrixXd ObservationPath::increments_at_level(int level, int interval) const {
  check_level(level);
  if (interval < 0 || interval >= horizon_) throw InvalidArgument("observation path: unit interval out of range");
  const long per_unit_fine = 1L << finest_level_;
  const long per_unit = 1L << level;
  const long ratio = per_unit_fine / per_unit;
  const long offset = interval * per_unit_fine;
  Eigen::MatrixXd out(increments_.rows(), per_unit);
  for (long j = 0; j < per_unit; ++j) {
    for (Eigen::Index c = 0; c < increments_.rows(); ++c) {
      double sum = increments_(c, offset + j * ratio);
      for (long k = 1; k < ratio; ++k) sum += increments_(c, offset + j * ratio + k);
      out(c, j) = sum;
    }
  }
  return out;
}

bool operator==(const ObservationPath& a, const ObservationPath& b) {
  return a.horizon_ == b.horizon_ && a.finest_level_ == b.finest_level_ && a.seed_ == b.seed_ && a.mode_ == b.mode_ &&
         a.increments_.rows() == b.increments_.rows() && a.increments_.cols() == b.increments_.cols() &&
         a.increments_ == b.increments_;
}

ObservationPath simulate_observations(GenerationMode mode, const ModelSpec& model, int horizon, int finest_level,
                                      std::uint64_t seed) {
  if (finest_level < 1) throw InvalidArgument("simulate_observations: L_data must be >= 1");
  const long n = checked_length(horizon, finest_level);
  const int dy = model.obs_dim;
  const int dx = model.state_dim;
  if (dy < 1 || dy > kMaxDim || dx < 1 || dx > kMaxDim) {
    throw InvalidArgument("simulate_observations: invalid model dimensions");
  }
  const double dt = step_size(finest_level);
  const double sqrt_dt = std::sqrt(dt);
  const auto level = static_cast<std::uint32_t>(finest_level);

  Eigen::MatrixXd increments(dy, n);
  CounterStream obs_noise(seed, StreamPurpose::kDataObservation, level, 0, 0);
  obs_noise.fill_gaussian(increments, sqrt_dt);

  if (mode == GenerationMode::kP) {
    CounterStream signal_noise(seed, StreamPurpose::kDataSignal, level, 0, 0);
    Eigen::MatrixXd latent(dx, n + 1);
    StateVector x = model.initial_state;
    StateVector xi(dx);
    latent.col(0) = x;
    for (long k = 0; k < n; ++k) {
      const ObsVector hx = model.observation(x);
      increments.col(k) = hx * dt + increments.col(k);
      signal_noise.fill_gaussian(xi, sqrt_dt);
      x = x + model.drift(x) * dt + model.diffusion(x) * xi;
      latent.col(k + 1) = x;
    }
    ObservationPath result(horizon, finest_level, dy, seed, mode, std::move(increments));
    result.set_latent_states(std::move(latent));
    return result;
  }
  return ObservationPath(horizon, finest_level, dy, seed, mode, std::move(increments));
}

void write_path(const ObservationPath& path, const std::filesystem::path& file) {
  std::vector<unsigned char> bytes(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(path.horizon()));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(path.finest_level()));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(path.obs_dim()));
  put_le<std::uint64_t>(bytes, path.seed());
  bytes.push_back(static_cast<unsigned char>(path.mode()));
  const Eigen::MatrixXd& inc = path.increments();
  bytes.reserve(bytes.size() + 8 * static_cast<std::size_t>(inc.size()));
  for (Eigen::Index k = 0; k < inc.cols(); ++k) {
    for (Eigen::Index c = 0; c < inc.rows(); ++c) put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(inc(c, k)));
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + file.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + file.string() + "'");
}

ObservationPath read_path(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open '" + file.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderSize) throw FormatError("path file: truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), 7) != 0) throw FormatError("path file: bad magic");
  if (bytes[7] != static_cast<unsigned char>(kMagic[7])) {
    throw FormatError(std::string("path file: unsupported version '") + static_cast<char>(bytes[7]) + "'");
  }
  const unsigned char* p = bytes.data() + 8;
  const auto horizon = get_le<std::uint32_t>(p);
  const auto finest = get_le<std::uint32_t>(p + 4);
  const auto dy = get_le<std::uint32_t>(p + 8);
  const auto seed = get_le<std::uint64_t>(p + 12);
  const auto mode_byte = p[20];
  if (mode_byte > 1) throw FormatError("path file: unknown generation mode");
  if (horizon < 1 || finest > 30 || dy < 1 || dy > static_cast<std::uint32_t>(kMaxDim)) {
    throw FormatError("path file: invalid dimensions in header");
  }
  const long n = checked_length(static_cast<int>(horizon), static_cast<int>(finest));
  const std::size_t payload = bytes.size() - kHeaderSize;
  const std::size_t expected = 8 * static_cast<std::size_t>(n) * dy;
  if (payload != expected) {
    throw FormatError("path file: length mismatch, expected " + std::to_string(expected / 8) + " values, found " +
                      std::to_string(payload / 8) + (payload % 8 ? " (plus a partial value)" : ""));
  }
  Eigen::MatrixXd inc(dy, n);
  const unsigned char* data = bytes.data() + kHeaderSize;
  for (long k = 0; k < n; ++k) {
    for (std::uint32_t c = 0; c < dy; ++c) {
      inc(c, k) = std::bit_cast<double>(get_le<std::uint64_t>(data));
      data += 8;
    }
  }
  return ObservationPath(static_cast<int>(horizon), static_cast<int>(finest), static_cast<int>(dy), seed,
                         static_cast<GenerationMode>(mode_byte), std::move(inc));
}

void write_path_csv(const ObservationPath& path, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error("cannot open '" + file.string() + "' for writing");
  out << "k,component,value\n";
  const Eigen::MatrixXd& inc = path.increments();
  char buf[64];
  for (Eigen::Index k = 0; k < inc.cols(); ++k) {
    for (Eigen::Index c = 0; c < inc.rows(); ++c) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), inc(c, k));
      out << k << ',' << c << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
  }
}

const char* to_string(GenerationMode mode) { return mode == GenerationMode::kP ? "p" : "pbar"; }

GenerationMode parse_generation_mode(std::string_view text) {
  if (text == "pbar") return GenerationMode::kPBar;
  if (text == "p") return GenerationMode::kP;
  throw InvalidArgument("unknown generation mode '" + std::string(text) + "' (expected pbar or p)");
}

}  // namespace mlpf
