#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dqt {

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& text);  // YYYY-MM-DD
std::string format_date(Date d);

struct Bar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;

  /// Prices positive and low <= min(open, close) <= max(open, close) <= high.
  bool valid() const;
};

struct PriceSeries {
  std::string ticker;
  std::vector<Bar> bars;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }

  std::vector<double> closes() const;
  std::vector<double> highs() const;
  std::vector<double> lows() const;
  std::vector<double> adj_closes() const;
};

struct DateRange {
  Date first;
  Date last;  // inclusive

  bool contains(Date d) const { return first <= d && d <= last; }
};

struct SplitSpec {
  DateRange train;
  DateRange test;
  DateRange validation;

  /// Train 2000-01-01..2005-12-31, test 2008-01-01..2016-12-31,
  /// validation 2016-01-01..2016-12-31 (overlaps test).
  static SplitSpec defaults();
};

struct SplitResult {
  PriceSeries train;
  PriceSeries test;
  PriceSeries validation;
};

/// Reads a daily-bar CSV. Required columns (any order, case-insensitive):
/// Date, Open, High, Low, Close, Adj Close. Extra columns are ignored.
/// Throws DataError naming the 1-based line of the first bad row.
PriceSeries load_csv(const std::filesystem::path& path);
PriceSeries parse_csv(std::string_view text, const std::string& ticker);

void save_csv(const PriceSeries& series, const std::filesystem::path& path);
std::string to_csv(const PriceSeries& series);

/// Bars whose dates fall in `range`; throws DataError if none do.
PriceSeries slice(const PriceSeries& series, const DateRange& range, const std::string& range_name);
SplitResult split(const PriceSeries& series, const SplitSpec& spec);

/// Index range [first, last] of bars inside `range` (throws if empty).
std::pair<std::size_t, std::size_t> index_range(const PriceSeries& series, const DateRange& range);

enum class SynthKind { Uptrend, Downtrend, Sine, RandomWalk };

SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

/// Deterministic fixture series on consecutive business days from 2000-01-03.
///  - Uptrend:    close_t = 100 * (1 + rate)^t, all five prices equal
///  - Downtrend:  close_t = 100 * (1 - rate)^t, all five prices equal
///  - Sine:       close_t = 100 * (1 + rate * sin(2 pi t / 64)), rate < 1
///  - RandomWalk: log-normal walk with daily volatility `rate`, OHLC jitter from `seed`
PriceSeries synthesize(SynthKind kind, int days, double rate, std::uint64_t seed);

}  // namespace dqt
