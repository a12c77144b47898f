#pragma once

#include <array>
#include <cstddef>
#include <filesystem>

#include "dqt/indicators.hpp"

namespace dqt {

inline constexpr std::size_t kGridSide = 9;
inline constexpr std::size_t kCells = kGridSide * kGridSide;  // trailing days per channel
inline constexpr std::size_t kChannels = kNumFeatures;
inline constexpr std::size_t kImageSize = kChannels * kCells;

/// 12 channels x 9 rows x 9 cols. Channel c, row-major cell k holds feature c at
/// day anchor - 80 + k, so cell 80 (row 8, col 8) is the anchor day.
struct StateImage {
  std::array<double, kImageSize> cells{};
  std::size_t anchor = 0;

  double at(std::size_t channel, std::size_t row, std::size_t col) const {
    return cells[channel * kCells + row * kGridSide + col];
  }
  double& at(std::size_t channel, std::size_t row, std::size_t col) {
    return cells[channel * kCells + row * kGridSide + col];
  }
};

/// 12 steps x 81 features; step t is channel t flattened row-major.
using Sequence = std::array<std::array<double, kCells>, kChannels>;

struct Normalization {
  enum class Kind { ZScore, Affine };
  Kind kind = Kind::ZScore;
  double lo = 0.0;  // Affine: clamp to [lo, hi], then map to [0, 1]
  double hi = 1.0;
};

struct NormalizationSpec {
  std::array<Normalization, kNumFeatures> per_feature;

  /// Prices, Momentum, PPO and MACD histogram are z-scored over the 81-day window;
  /// RSI and %K map [0, 100] to [0, 1]; Fib level is passed through [0, 1];
  /// %B is clipped to [-1, 2] and mapped to [0, 1].
  static NormalizationSpec defaults();
};

/// Smallest anchor day with 81 valid trailing days; throws DataError if none.
std::size_t first_buildable_day(const FeatureMatrix& fm);

/// Unnormalized layout of the 81 trailing days ending at `day`.
StateImage raw_window(const FeatureMatrix& fm, std::size_t day);

StateImage build_state(const FeatureMatrix& fm, std::size_t day, const NormalizationSpec& spec);

Sequence to_sequence(const StateImage& img);
StateImage from_sequence(const Sequence& seq, std::size_t anchor);

/// Twelve 9x9 grids, one block per channel, separated by a header line.
void save_state_csv(const StateImage& img, const std::filesystem::path& path);

}  // namespace dqt
