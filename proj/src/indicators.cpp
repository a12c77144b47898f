#include "dqt/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "dqt/error.hpp"

namespace dqt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_length(std::size_t have, std::size_t need, const char* what) {
  if (have < need) {
    throw DataError(std::string(what) + ": series too short (" + std::to_string(have) + " < " +
                    std::to_string(need) + ")");
  }
}

void require_window(int window, const char* what) {
  if (window < 1) throw std::invalid_argument(std::string(what) + ": window must be >= 1");
}

// Exact for constant windows so that constant inputs give exactly-zero oscillators.
double window_mean(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return *lo;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void IndicatorParams::validate() const {
  for (int w : {rsi_window, momentum_window, ppo_fast, ppo_slow, stoch_window, boll_window, fib_window, macd_fast,
                macd_slow, macd_signal}) {
    if (w < 1) throw ConfigError("indicator windows must be >= 1");
  }
  if (ppo_fast >= ppo_slow) throw ConfigError("ppo_fast must be < ppo_slow");
  if (macd_fast >= macd_slow) throw ConfigError("macd_fast must be < macd_slow");
  if (!(boll_k > 0.0)) throw ConfigError("boll_k must be positive");
}

Series rsi(std::span<const double> closes, int window) {
  require_window(window, "rsi");
  const auto w = static_cast<std::size_t>(window);
  require_length(closes.size(), w + 1, "rsi");
  Series out(closes.size(), kNaN);
  double gain = 0.0, loss = 0.0;
  for (std::size_t t = 1; t <= w; ++t) {
    const double d = closes[t] - closes[t - 1];
    gain += std::max(d, 0.0);
    loss += std::max(-d, 0.0);
  }
  gain /= window;
  loss /= window;
  auto value = [](double g, double l) { return g + l == 0.0 ? 50.0 : 100.0 * g / (g + l); };
  out[w] = value(gain, loss);
  for (std::size_t t = w + 1; t < closes.size(); ++t) {
    const double d = closes[t] - closes[t - 1];
    gain = (gain * (window - 1) + std::max(d, 0.0)) / window;
    loss = (loss * (window - 1) + std::max(-d, 0.0)) / window;
    out[t] = value(gain, loss);
  }
  return out;
}

Series momentum(std::span<const double> closes, int window) {
  require_window(window, "momentum");
  const auto w = static_cast<std::size_t>(window);
  require_length(closes.size(), w + 1, "momentum");
  Series out(closes.size(), kNaN);
  for (std::size_t t = w; t < closes.size(); ++t) out[t] = closes[t] / closes[t - w] - 1.0;
  return out;
}

Series ema(std::span<const double> values, int window) {
  require_window(window, "ema");
  const auto w = static_cast<std::size_t>(window);
  require_length(values.size(), w, "ema");
  Series out(values.size(), kNaN);
  const double alpha = 2.0 / (window + 1.0);
  double e = window_mean(values.first(w));
  out[w - 1] = e;
  for (std::size_t t = w; t < values.size(); ++t) {
    e += alpha * (values[t] - e);
    out[t] = e;
  }
  return out;
}

Series ppo(std::span<const double> closes, int fast, int slow) {
  require_window(fast, "ppo");
  require_window(slow, "ppo");
  require_length(closes.size(), static_cast<std::size_t>(slow), "ppo");
  const auto ef = ema(closes, fast);
  const auto es = ema(closes, slow);
  Series out(closes.size(), kNaN);
  for (std::size_t t = static_cast<std::size_t>(std::max(fast, slow)) - 1; t < closes.size(); ++t) {
    out[t] = 100.0 * (ef[t] - es[t]) / es[t];
  }
  return out;
}

Series stochastic_k(std::span<const double> highs, std::span<const double> lows, std::span<const double> closes,
                    int window) {
  require_window(window, "stochastic_k");
  const auto w = static_cast<std::size_t>(window);
  require_length(closes.size(), w, "stochastic_k");
  if (highs.size() != closes.size() || lows.size() != closes.size()) {
    throw std::invalid_argument("stochastic_k: input lengths differ");
  }
  Series out(closes.size(), kNaN);
  for (std::size_t t = w - 1; t < closes.size(); ++t) {
    const double hh = *std::max_element(highs.begin() + (t + 1 - w), highs.begin() + t + 1);
    const double ll = *std::min_element(lows.begin() + (t + 1 - w), lows.begin() + t + 1);
    out[t] = hh == ll ? 50.0 : 100.0 * (closes[t] - ll) / (hh - ll);
  }
  return out;
}

Series bollinger_pct_b(std::span<const double> closes, int window, double k) {
  require_window(window, "bollinger_pct_b");
  const auto w = static_cast<std::size_t>(window);
  require_length(closes.size(), w, "bollinger_pct_b");
  Series out(closes.size(), kNaN);
  for (std::size_t t = w - 1; t < closes.size(); ++t) {
    const auto win = closes.subspan(t + 1 - w, w);
    const auto [lo, hi] = std::minmax_element(win.begin(), win.end());
    if (*lo == *hi) {
      out[t] = 0.5;
      continue;
    }
    const double mean = window_mean(win);
    double ss = 0.0;
    for (double x : win) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(w));
    out[t] = (closes[t] - (mean - k * sigma)) / (2.0 * k * sigma);
  }
  return out;
}

double snap_fibonacci(double position) {
  double best = kFibRatios[0];
  double best_dist = std::abs(position - best);
  for (std::size_t i = 1; i < kFibRatios.size(); ++i) {
    const double d = std::abs(position - kFibRatios[i]);
    // Strictly closer by more than rounding noise; ties keep the lower ratio.
    if (d < best_dist - 1e-12) {
      best = kFibRatios[i];
      best_dist = d;
    }
  }
  return best;
}

Series fibonacci_level(std::span<const double> highs, std::span<const double> lows, std::span<const double> closes,
                       int window) {
  require_window(window, "fibonacci_level");
  const auto w = static_cast<std::size_t>(window);
  require_length(closes.size(), w, "fibonacci_level");
  if (highs.size() != closes.size() || lows.size() != closes.size()) {
    throw std::invalid_argument("fibonacci_level: input lengths differ");
  }
  Series out(closes.size(), kNaN);
  for (std::size_t t = w - 1; t < closes.size(); ++t) {
    const double hh = *std::max_element(highs.begin() + (t + 1 - w), highs.begin() + t + 1);
    const double ll = *std::min_element(lows.begin() + (t + 1 - w), lows.begin() + t + 1);
    out[t] = hh == ll ? 0.5 : snap_fibonacci((closes[t] - ll) / (hh - ll));
  }
  return out;
}

Series macd_hist(std::span<const double> closes, int fast, int slow, int signal) {
  require_window(fast, "macd_hist");
  require_window(slow, "macd_hist");
  require_window(signal, "macd_hist");
  require_length(closes.size(), static_cast<std::size_t>(slow + signal), "macd_hist");
  const auto ef = ema(closes, fast);
  const auto es = ema(closes, slow);
  const std::size_t line_start = static_cast<std::size_t>(std::max(fast, slow)) - 1;
  std::vector<double> line(closes.size() - line_start);
  for (std::size_t t = line_start; t < closes.size(); ++t) line[t - line_start] = ef[t] - es[t];
  const auto sig = ema(line, signal);
  Series out(closes.size(), kNaN);
  for (std::size_t i = static_cast<std::size_t>(signal) - 1; i < line.size(); ++i) {
    out[line_start + i] = line[i] - sig[i];
  }
  return out;
}

FeatureMatrix::FeatureMatrix(std::size_t days, std::size_t first_valid)
    : values_(days * kNumFeatures, kNaN), valid_(days, 0), first_valid_(first_valid) {
  for (std::size_t d = first_valid; d < days; ++d) valid_[d] = 1;
}

std::size_t feature_warmup(const IndicatorParams& p) {
  return static_cast<std::size_t>(std::max({p.rsi_window, p.momentum_window, p.ppo_slow - 1, p.stoch_window - 1,
                                            p.boll_window - 1, p.fib_window - 1,
                                            p.macd_slow + p.macd_signal - 2}));
}

FeatureMatrix build_feature_matrix(const PriceSeries& series, const IndicatorParams& params) {
  params.validate();
  const std::size_t warmup = feature_warmup(params);
  if (series.size() < warmup + 1) {
    throw DataError(series.ticker + ": need at least " + std::to_string(warmup + 1) +
                    " bars for indicator warm-up, have " + std::to_string(series.size()));
  }
  const auto closes = series.closes();
  const auto highs = series.highs();
  const auto lows = series.lows();

  const std::array<Series, 7> indicators = {
      rsi(closes, params.rsi_window),
      momentum(closes, params.momentum_window),
      ppo(closes, params.ppo_fast, params.ppo_slow),
      stochastic_k(highs, lows, closes, params.stoch_window),
      bollinger_pct_b(closes, params.boll_window, params.boll_k),
      fibonacci_level(highs, lows, closes, params.fib_window),
      macd_hist(closes, params.macd_fast, params.macd_slow, params.macd_signal),
  };

  FeatureMatrix fm(series.size(), warmup);
  for (std::size_t d = 0; d < series.size(); ++d) {
    const Bar& b = series.bars[d];
    fm.at(d, kOpen) = b.open;
    fm.at(d, kHigh) = b.high;
    fm.at(d, kLow) = b.low;
    fm.at(d, kClose) = b.close;
    fm.at(d, kAdjClose) = b.adj_close;
    for (std::size_t i = 0; i < indicators.size(); ++i) fm.at(d, kRsi + i) = indicators[i][d];
  }
  return fm;
}

void save_feature_csv(const FeatureMatrix& fm, const PriceSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "date";
  for (auto name : kFeatureNames) out << ',' << name;
  out << ",valid\n" << std::setprecision(17);
  for (std::size_t d = 0; d < fm.days(); ++d) {
    out << format_date(series.bars[d].date);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      out << ',';
      if (fm.valid(d) || f < kRsi) out << fm.at(d, f);
    }
    out << ',' << (fm.valid(d) ? 1 : 0) << '\n';
  }
}

}  // namespace dqt
