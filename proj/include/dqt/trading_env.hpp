#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dqt/indicators.hpp"
#include "dqt/market_data.hpp"

namespace dqt {

enum class Action : int { Hold = 0, Sell = 1, Buy = 2 };
inline constexpr std::size_t kNumActions = 3;

std::string_view to_string(Action a);

struct EnvConfig {
  double initial_cash = 100000.0;
  double commission_rate = 0.001;  // fraction of trade notional
  double impact_rate = 0.0005;     // fraction of trade notional
  double invalid_penalty = 0.05;   // subtracted from the reward of an invalid action

  void validate() const;
};

struct PortfolioState {
  double cash = 0.0;
  double shares = 0.0;
  int position = 0;  // 1 iff shares > 0
  double value = 0.0;
  std::size_t day = 0;
};

struct StepOutcome {
  double reward = 0.0;
  std::size_t next_day = 0;
  bool done = false;
  Action action = Action::Hold;
  bool valid = true;
  double price = 0.0;     // adj close of the action day
  double notional = 0.0;  // cash committed (buy) or proceeds before costs (sell)
  double costs = 0.0;
};

/// All-in / all-out single-asset simulator over bar indices [first_day, last_day].
/// Trades execute at the action day's adj close; the reward marks the portfolio
/// at the next day's adj close:
///   reward = (V_{t+1} - V_t) / V_t - invalid_penalty * [invalid]
class TradingEnv {
 public:
  TradingEnv(const PriceSeries& series, std::size_t first_day, std::size_t last_day, EnvConfig config);

  /// Episode over `range`, starting no earlier than the first day with a full state image.
  static TradingEnv for_range(const PriceSeries& series, const FeatureMatrix& fm, const DateRange& range,
                              EnvConfig config);
  /// Episode over the whole series from the first buildable day.
  static TradingEnv whole(const PriceSeries& series, const FeatureMatrix& fm, EnvConfig config);

  std::size_t first_day() const { return first_; }
  std::size_t last_day() const { return last_; }
  std::size_t steps() const { return last_ - first_; }
  const EnvConfig& config() const { return config_; }
  const PriceSeries& series() const { return *series_; }

  PortfolioState reset() const;
  /// Throws std::logic_error when `state` is already at the last day.
  std::pair<PortfolioState, StepOutcome> step(const PortfolioState& state, Action action) const;

 private:
  const PriceSeries* series_;
  std::size_t first_;
  std::size_t last_;
  EnvConfig config_;
};

/// Buy at first_day (costs applied once), then mark daily at adj close.
/// Returns last_day - first_day + 1 values, the first being the post-purchase value.
std::vector<double> buy_and_hold(const PriceSeries& series, std::size_t first_day, std::size_t last_day,
                                 const EnvConfig& config);
std::vector<double> buy_and_hold(const PriceSeries& series, const EnvConfig& config);

/// value_end / value_start - 1.
double cumulative_return(std::span<const double> curve);

struct TradeLogRow {
  std::size_t day = 0;
  Action action = Action::Hold;
  bool valid = true;
  double price = 0.0;
  double notional = 0.0;
  double costs = 0.0;
  double reward = 0.0;
  double value = 0.0;  // marked at the next day
};

void save_trade_log(std::span<const TradeLogRow> rows, const PriceSeries& series, const std::filesystem::path& path);

}  // namespace dqt
