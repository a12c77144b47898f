#include "dqt/trading_env.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>

#include "dqt/error.hpp"
#include "dqt/state_builder.hpp"

namespace dqt {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Hold: return "hold";
    case Action::Sell: return "sell";
    case Action::Buy: return "buy";
  }
  return "?";
}

void EnvConfig::validate() const {
  if (!(initial_cash > 0.0)) throw ConfigError("env: initial_cash must be > 0");
  if (!(commission_rate >= 0.0) || !(impact_rate >= 0.0)) throw ConfigError("env: cost rates must be >= 0");
  if (commission_rate + impact_rate >= 1.0) throw ConfigError("env: cost rates must sum to < 1");
  if (!(invalid_penalty >= 0.0)) throw ConfigError("env: invalid_penalty must be >= 0");
}

TradingEnv::TradingEnv(const PriceSeries& series, std::size_t first_day, std::size_t last_day, EnvConfig config)
    : series_(&series), first_(first_day), last_(last_day), config_(config) {
  config_.validate();
  if (last_day >= series.size() || first_day >= last_day) {
    throw DataError(series.ticker + ": need at least one tradable day (first " + std::to_string(first_day) +
                    ", last " + std::to_string(last_day) + ", bars " + std::to_string(series.size()) + ")");
  }
}

TradingEnv TradingEnv::for_range(const PriceSeries& series, const FeatureMatrix& fm, const DateRange& range,
                                 EnvConfig config) {
  const auto [lo, hi] = index_range(series, range);
  const std::size_t first = std::max(lo, first_buildable_day(fm));
  return TradingEnv(series, first, hi, config);
}

TradingEnv TradingEnv::whole(const PriceSeries& series, const FeatureMatrix& fm, EnvConfig config) {
  return TradingEnv(series, first_buildable_day(fm), series.size() - 1, config);
}

PortfolioState TradingEnv::reset() const {
  return PortfolioState{.cash = config_.initial_cash,
                        .shares = 0.0,
                        .position = 0,
                        .value = config_.initial_cash,
                        .day = first_};
}

std::pair<PortfolioState, StepOutcome> TradingEnv::step(const PortfolioState& state, Action action) const {
  if (state.day >= last_) throw std::logic_error("step() on a finished episode");
  const double price = series_->bars[state.day].adj_close;
  const double cost_rate = config_.commission_rate + config_.impact_rate;

  PortfolioState next = state;
  StepOutcome out;
  out.action = action;
  out.price = price;
  switch (action) {
    case Action::Hold: break;
    case Action::Buy:
      if (state.position == 1) {
        out.valid = false;
        break;
      }
      out.notional = state.cash;
      out.costs = state.cash * cost_rate;
      next.shares = (state.cash - out.costs) / price;
      next.cash = 0.0;
      next.position = 1;
      break;
    case Action::Sell:
      if (state.position == 0) {
        out.valid = false;
        break;
      }
      out.notional = state.shares * price;
      out.costs = out.notional * cost_rate;
      next.cash = state.cash + out.notional - out.costs;
      next.shares = 0.0;
      next.position = 0;
      break;
  }

  next.day = state.day + 1;
  next.value = next.cash + next.shares * series_->bars[next.day].adj_close;
  out.next_day = next.day;
  out.done = next.day == last_;
  out.reward = (next.value - state.value) / state.value - (out.valid ? 0.0 : config_.invalid_penalty);
  return {next, out};
}

std::vector<double> buy_and_hold(const PriceSeries& series, std::size_t first_day, std::size_t last_day,
                                 const EnvConfig& config) {
  if (series.empty() || first_day > last_day || last_day >= series.size()) {
    throw DataError("buy_and_hold: invalid day range");
  }
  config.validate();
  const double shares =
      config.initial_cash * (1.0 - config.commission_rate - config.impact_rate) / series.bars[first_day].adj_close;
  std::vector<double> curve;
  curve.reserve(last_day - first_day + 1);
  for (std::size_t d = first_day; d <= last_day; ++d) curve.push_back(shares * series.bars[d].adj_close);
  return curve;
}

std::vector<double> buy_and_hold(const PriceSeries& series, const EnvConfig& config) {
  if (series.empty()) throw DataError("buy_and_hold: empty series");
  return buy_and_hold(series, 0, series.size() - 1, config);
}

double cumulative_return(std::span<const double> curve) {
  if (curve.empty()) throw std::invalid_argument("cumulative_return: empty curve");
  return curve.back() / curve.front() - 1.0;
}

void save_trade_log(std::span<const TradeLogRow> rows, const PriceSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "day,date,action,valid,price,notional,costs,reward,value\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.day << ',' << format_date(series.bars[r.day].date) << ',' << to_string(r.action) << ','
        << (r.valid ? 1 : 0) << ',' << r.price << ',' << r.notional << ',' << r.costs << ',' << r.reward << ','
        << r.value << '\n';
  }
}

}  // namespace dqt
