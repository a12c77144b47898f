#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "dqt/error.hpp"
#include "dqt/indicators.hpp"
#include "oracles.hpp"

using namespace dqt;
using namespace oracle;

namespace {

void expect_rel(double got, double want, double scale, const char* what, std::size_t t) {
  EXPECT_LE(std::abs(got - want), 1e-9 * std::max(std::abs(want), scale)) << what << " t=" << t << " got " << got
                                                                          << " want " << want;
}

}  // namespace

TEST(Indicators, RsiMonotoneAndConstant) {
  std::vector<double> up(40), flat(40, 5.0);
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = 10.0 + i;
  const auto r = rsi(up, 14);
  const auto f = rsi(flat, 14);
  for (std::size_t t = 0; t < 14; ++t) EXPECT_TRUE(std::isnan(r[t]));
  for (std::size_t t = 14; t < up.size(); ++t) {
    EXPECT_EQ(r[t], 100.0);
    EXPECT_EQ(f[t], 50.0);
  }
}

TEST(Indicators, RsiTwentyDayOracle) {
  std::mt19937_64 rng(20);
  const auto c = random_closes(rng, 20);
  const auto r = rsi(c, 14);
  for (std::size_t t = 14; t < 20; ++t) expect_rel(r[t], oracle_rsi(c, 14, t), 1.0, "rsi", t);
}

TEST(Indicators, MomentumClosedForm) {
  std::vector<double> c(30);
  for (std::size_t t = 0; t < c.size(); ++t) c[t] = t + 1.0;
  EXPECT_DOUBLE_EQ(momentum(c, 10)[19], 1.0);
  const auto m = momentum(std::vector<double>(30, 3.0), 10);
  for (std::size_t t = 10; t < 30; ++t) EXPECT_EQ(m[t], 0.0);
}

TEST(Indicators, EmaOfConstantIsExact) {
  const auto e = ema(std::vector<double>(50, 0.1), 12);
  for (std::size_t t = 11; t < 50; ++t) EXPECT_EQ(e[t], 0.1);
}

TEST(Indicators, PpoSigns) {
  std::vector<double> up(80);
  for (std::size_t t = 0; t < up.size(); ++t) up[t] = 100.0 * std::pow(1.01, t);
  const auto p = ppo(up, 12, 26);
  for (std::size_t t = 25; t < up.size(); ++t) EXPECT_GT(p[t], 0.0) << t;
  const auto z = ppo(std::vector<double>(80, 7.0), 12, 26);
  for (std::size_t t = 25; t < 80; ++t) EXPECT_EQ(z[t], 0.0);
}

TEST(Indicators, StochasticExtremes) {
  std::vector<double> h(20, 10.0), l(20, 5.0), c(20, 7.0);
  c[19] = 10.0;
  EXPECT_DOUBLE_EQ(stochastic_k(h, l, c, 14)[19], 100.0);
  c[19] = 5.0;
  EXPECT_DOUBLE_EQ(stochastic_k(h, l, c, 14)[19], 0.0);
  std::vector<double> f(20, 3.0);
  EXPECT_EQ(stochastic_k(f, f, f, 14)[19], 50.0);
}

TEST(Indicators, BollingerAnchors) {
  // symmetric window, last close at the mean
  std::vector<double> c = {1, 3, 1, 3, 2};
  EXPECT_NEAR(bollinger_pct_b(c, 5, 2.0)[4], 0.5, 1e-12);
  // close placed on the upper band: mean + 2 sigma of the window including itself
  std::vector<double> w = {10, 12, 11, 9, 13, 10, 11, 12, 9, 10};
  // solve for x with x = mean + k sd where stats include x: iterate to a fixed point
  double x = 14;
  for (int it = 0; it < 200; ++it) {
    auto all = w;
    all.push_back(x);
    double m = 0, s = 0;
    for (double v : all) m += v;
    m /= all.size();
    for (double v : all) s += (v - m) * (v - m);
    x = m + 2.0 * std::sqrt(s / all.size());
  }
  auto all = w;
  all.push_back(x);
  EXPECT_NEAR(bollinger_pct_b(all, 11, 2.0)[10], 1.0, 1e-9);
  EXPECT_EQ(bollinger_pct_b(std::vector<double>(25, 4.0), 20, 2.0)[24], 0.5);
}

TEST(Indicators, FibonacciSnapping) {
  EXPECT_EQ(snap_fibonacci(0.40), 0.382);
  EXPECT_EQ(snap_fibonacci(0.309), 0.236);  // tie goes low
  EXPECT_EQ(snap_fibonacci(0.0), 0.0);
  EXPECT_EQ(snap_fibonacci(0.99), 1.0);
  EXPECT_EQ(snap_fibonacci(0.7), 0.618);  // 0.702 is the midpoint of 0.618 and 0.786
  std::vector<double> h(90, 10.0), l(90, 5.0), c(90, 7.0);
  c[89] = 10.0;
  EXPECT_EQ(fibonacci_level(h, l, c, 81)[89], 1.0);
  std::vector<double> f(90, 2.0);
  EXPECT_EQ(fibonacci_level(f, f, f, 81)[89], 0.5);
}

TEST(Indicators, MacdUptrendThenFlat) {
  std::vector<double> c;
  for (int t = 0; t < 80; ++t) c.push_back(100.0 * std::pow(1.01, t));
  for (int t = 0; t < 200; ++t) c.push_back(c.back());
  const auto m = macd_hist(c, 12, 26, 9);
  for (std::size_t t = 33; t < 80; ++t) EXPECT_GT(m[t], 0.0) << t;
  // after the trend stops, the histogram decays toward zero
  EXPECT_LT(std::abs(m[279]), 1e-3 * std::abs(m[79]));
  const auto want = oracle_macd_hist(c, 12, 26, 9);
  for (std::size_t t = 33; t < c.size(); ++t) expect_rel(m[t], want[t], 1.0, "macd", t);
  const auto z = macd_hist(std::vector<double>(60, 9.0), 12, 26, 9);
  for (std::size_t t = 33; t < 60; ++t) EXPECT_EQ(z[t], 0.0);
}

TEST(Indicators, TooShortSeriesThrow) {
  const std::vector<double> c(10, 1.0);
  EXPECT_THROW(rsi(c, 14), DataError);
  EXPECT_THROW(momentum(c, 10), DataError);
  EXPECT_THROW(ppo(c, 12, 26), DataError);
  EXPECT_THROW(stochastic_k(c, c, c, 14), DataError);
  EXPECT_THROW(bollinger_pct_b(c, 20, 2.0), DataError);
  EXPECT_THROW(fibonacci_level(c, c, c, 81), DataError);
  EXPECT_THROW(macd_hist(c, 12, 26, 9), DataError);
  EXPECT_THROW(rsi(c, 0), std::invalid_argument);
}

TEST(Indicators, ParamsValidate) {
  IndicatorParams p;
  EXPECT_NO_THROW(p.validate());
  p.ppo_fast = 30;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.macd_fast = 26;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.boll_window = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

// Every indicator against the oracles on 50 random 300-day series.
TEST(Indicators, OracleEquivalenceOnRandomSeries) {
  std::mt19937_64 rng(2024);
  const IndicatorParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_hlc(rng, 300);
    const auto r = rsi(s.c, p.rsi_window);
    const auto m = momentum(s.c, p.momentum_window);
    const auto pp = ppo(s.c, p.ppo_fast, p.ppo_slow);
    const auto k = stochastic_k(s.h, s.l, s.c, p.stoch_window);
    const auto b = bollinger_pct_b(s.c, p.boll_window, p.boll_k);
    const auto f = fibonacci_level(s.h, s.l, s.c, p.fib_window);
    const auto h = macd_hist(s.c, p.macd_fast, p.macd_slow, p.macd_signal);
    const auto e12 = oracle_ema_series(s.c, 12), e26 = oracle_ema_series(s.c, 26);
    const auto hw = oracle_macd_hist(s.c, 12, 26, 9);
    for (std::size_t t = 0; t < 300; ++t) {
      if (t >= 14) expect_rel(r[t], oracle_rsi(s.c, 14, t), 1.0, "rsi", t);
      if (t >= 10) expect_rel(m[t], s.c[t] / s.c[t - 10] - 1.0, 1e-3, "momentum", t);
      if (t >= 25) {
        const double want = 100.0 * (e12[t] / e26[t] - 1.0);
        expect_rel(pp[t], want, 1e-2, "ppo", t);
      }
      if (t >= 13) expect_rel(k[t], oracle_stoch(s, 14, t), 1.0, "stoch", t);
      if (t >= 19) expect_rel(b[t], oracle_pct_b(s.c, 20, 2.0, t), 1.0, "pct_b", t);
      if (t >= 80) EXPECT_EQ(f[t], oracle_fib(s, 81, t)) << t;
      if (t >= 33) expect_rel(h[t], hw[t], 1e-3 * s.c[t], "macd", t);
      if (t < 10) EXPECT_TRUE(std::isnan(m[t]));
    }
  }
}

TEST(Indicators, RangesAndScaleInvariance) {
  std::mt19937_64 rng(99);
  const double c = 3.7;
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_hlc(rng, 300);
    Hlc scaled = s;
    for (auto* v : {&scaled.h, &scaled.l, &scaled.c}) {
      for (double& x : *v) x *= c;
    }
    const auto r = rsi(s.c, 14), r2 = rsi(scaled.c, 14);
    const auto k = stochastic_k(s.h, s.l, s.c, 14), k2 = stochastic_k(scaled.h, scaled.l, scaled.c, 14);
    const auto f = fibonacci_level(s.h, s.l, s.c, 81), f2 = fibonacci_level(scaled.h, scaled.l, scaled.c, 81);
    const auto b = bollinger_pct_b(s.c, 20, 2.0), b2 = bollinger_pct_b(scaled.c, 20, 2.0);
    const auto m = momentum(s.c, 10), m2 = momentum(scaled.c, 10);
    const auto p = ppo(s.c, 12, 26), p2 = ppo(scaled.c, 12, 26);
    const auto h = macd_hist(s.c, 12, 26, 9), h2 = macd_hist(scaled.c, 12, 26, 9);
    const std::set<double> grid(kFibRatios.begin(), kFibRatios.end());
    for (std::size_t t = 80; t < 300; ++t) {
      EXPECT_GE(r[t], 0.0);
      EXPECT_LE(r[t], 100.0);
      EXPECT_GE(k[t], 0.0);
      EXPECT_LE(k[t], 100.0);
      EXPECT_TRUE(grid.count(f[t]));
      expect_rel(r2[t], r[t], 1.0, "rsi scale", t);
      expect_rel(k2[t], k[t], 1.0, "stoch scale", t);
      expect_rel(b2[t], b[t], 1.0, "pct_b scale", t);
      expect_rel(m2[t], m[t], 1e-3, "momentum scale", t);
      expect_rel(p2[t], p[t], 1e-2, "ppo scale", t);
      expect_rel(h2[t], c * h[t], 1e-3 * c * s.c[t], "macd scale", t);
      EXPECT_EQ(f2[t], f[t]);
    }
  }
}

TEST(Indicators, FeatureMatrixLayout) {
  const auto s = synthesize(SynthKind::RandomWalk, 300, 0.02, 1);
  const IndicatorParams p;
  const auto fm = build_feature_matrix(s, p);
  EXPECT_EQ(feature_warmup(p), 80u);
  EXPECT_EQ(fm.first_valid(), 80u);
  EXPECT_FALSE(fm.valid(79));
  EXPECT_TRUE(fm.valid(80));
  EXPECT_EQ(fm.row(100).size(), kNumFeatures);
  const auto closes = s.closes();
  const auto r = rsi(closes, 14);
  const auto h = macd_hist(closes, 12, 26, 9);
  for (std::size_t d = 80; d < 300; ++d) {
    EXPECT_EQ(fm.at(d, kOpen), s.bars[d].open);
    EXPECT_EQ(fm.at(d, kHigh), s.bars[d].high);
    EXPECT_EQ(fm.at(d, kLow), s.bars[d].low);
    EXPECT_EQ(fm.at(d, kClose), s.bars[d].close);
    EXPECT_EQ(fm.at(d, kAdjClose), s.bars[d].adj_close);
    EXPECT_EQ(fm.at(d, kRsi), r[d]);
    EXPECT_EQ(fm.at(d, kMacdHist), h[d]);
    for (double v : fm.row(d)) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Indicators, FeatureMatrixConstantSeriesConventions) {
  const auto up = synthesize(SynthKind::Uptrend, 120, 0.0, 0);
  const auto fm = build_feature_matrix(up, IndicatorParams{});
  for (std::size_t d = fm.first_valid(); d < fm.days(); ++d) {
    EXPECT_EQ(fm.at(d, kRsi), 50.0);
    EXPECT_EQ(fm.at(d, kMomentum), 0.0);
    EXPECT_EQ(fm.at(d, kPpo), 0.0);
    EXPECT_EQ(fm.at(d, kStochK), 50.0);
    EXPECT_EQ(fm.at(d, kBollPctB), 0.5);
    EXPECT_EQ(fm.at(d, kFibLevel), 0.5);
    EXPECT_EQ(fm.at(d, kMacdHist), 0.0);
  }
}

TEST(Indicators, FeatureMatrixTooShort) {
  const auto s = synthesize(SynthKind::Uptrend, 80, 0.01, 0);
  EXPECT_THROW(build_feature_matrix(s, IndicatorParams{}), DataError);
  EXPECT_NO_THROW(build_feature_matrix(synthesize(SynthKind::Uptrend, 81, 0.01, 0), IndicatorParams{}));
}
