#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dqt/market_data.hpp"

namespace dqt {

/// Indicator outputs have the same length as their input; warm-up entries are NaN.
using Series = std::vector<double>;

struct IndicatorParams {
  int rsi_window = 14;
  int momentum_window = 10;
  int ppo_fast = 12;
  int ppo_slow = 26;
  int stoch_window = 14;
  int boll_window = 20;
  double boll_k = 2.0;
  int fib_window = 81;
  int macd_fast = 12;
  int macd_slow = 26;
  int macd_signal = 9;

  void validate() const;  // throws ConfigError
};

inline constexpr std::size_t kNumFeatures = 12;

enum Feature : std::size_t {
  kOpen = 0,
  kHigh,
  kLow,
  kClose,
  kAdjClose,
  kRsi,
  kMomentum,
  kPpo,
  kStochK,
  kBollPctB,
  kFibLevel,
  kMacdHist,
};

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "open", "high", "low", "close", "adj_close", "rsi", "momentum", "ppo", "stoch_k", "boll_pct_b", "fib_level",
    "macd_hist"};

inline constexpr std::array<double, 7> kFibRatios = {0.0, 0.236, 0.382, 0.5, 0.618, 0.786, 1.0};

/// Wilder RSI; 50 when average gain and loss are both zero. Valid from index `window`.
Series rsi(std::span<const double> closes, int window);
/// close_t / close_{t-window} - 1. Valid from index `window`.
Series momentum(std::span<const double> closes, int window);
/// EMA seeded with the SMA of the first `window` values. Valid from `window - 1`.
Series ema(std::span<const double> values, int window);
/// 100 * (EMA_fast - EMA_slow) / EMA_slow. Valid from `slow - 1`.
Series ppo(std::span<const double> closes, int fast, int slow);
/// Stochastic %K; 50 when the window range is zero. Valid from `window - 1`.
Series stochastic_k(std::span<const double> highs, std::span<const double> lows, std::span<const double> closes,
                    int window);
/// Bollinger %B with population sigma; 0.5 when sigma is zero. Valid from `window - 1`.
Series bollinger_pct_b(std::span<const double> closes, int window, double k);
/// Retracement position over the window snapped to kFibRatios. Valid from `window - 1`.
Series fibonacci_level(std::span<const double> highs, std::span<const double> lows, std::span<const double> closes,
                       int window);
/// MACD line minus its signal EMA. Valid from `slow + signal - 2`.
Series macd_hist(std::span<const double> closes, int fast, int slow, int signal);

/// Nearest ratio in kFibRatios; equidistant positions go to the lower ratio.
double snap_fibonacci(double position);

/// Per-day 12-vectors in Feature order plus a validity mask.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t days, std::size_t first_valid);

  std::size_t days() const { return valid_.size(); }
  std::size_t first_valid() const { return first_valid_; }
  bool valid(std::size_t day) const { return valid_[day] != 0; }

  double at(std::size_t day, std::size_t feature) const { return values_[day * kNumFeatures + feature]; }
  double& at(std::size_t day, std::size_t feature) { return values_[day * kNumFeatures + feature]; }
  std::span<const double> row(std::size_t day) const {
    return {values_.data() + day * kNumFeatures, kNumFeatures};
  }

 private:
  std::vector<double> values_;
  std::vector<unsigned char> valid_;
  std::size_t first_valid_ = 0;
};

/// Largest warm-up index across all indicators for these parameters.
std::size_t feature_warmup(const IndicatorParams& params);

FeatureMatrix build_feature_matrix(const PriceSeries& series, const IndicatorParams& params);

/// One row per day: date, the 12 features, valid flag.
void save_feature_csv(const FeatureMatrix& fm, const PriceSeries& series, const std::filesystem::path& path);

}  // namespace dqt
