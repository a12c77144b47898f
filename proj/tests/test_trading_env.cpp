#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dqt/error.hpp"
#include "dqt/trading_env.hpp"

using namespace dqt;

namespace {

EnvConfig zero_costs() {
  EnvConfig c;
  c.commission_rate = 0.0;
  c.impact_rate = 0.0;
  return c;
}

}  // namespace

TEST(TradingEnv, ResetDefaults) {
  const auto s = synthesize(SynthKind::Uptrend, 10, 0.01, 0);
  TradingEnv env(s, 2, 9, EnvConfig{});
  const auto a = env.reset(), b = env.reset();
  EXPECT_EQ(a.value, 100000.0);
  EXPECT_EQ(a.cash, 100000.0);
  EXPECT_EQ(a.shares, 0.0);
  EXPECT_EQ(a.position, 0);
  EXPECT_EQ(a.day, 2u);
  EXPECT_EQ(b.value, a.value);
  EXPECT_EQ(b.day, a.day);
  EXPECT_EQ(env.steps(), 7u);
}

TEST(TradingEnv, TooShortOrBadConfigThrows) {
  const auto s = synthesize(SynthKind::Uptrend, 10, 0.01, 0);
  EXPECT_THROW(TradingEnv(s, 9, 9, EnvConfig{}), DataError);
  EXPECT_THROW(TradingEnv(s, 3, 10, EnvConfig{}), DataError);
  EnvConfig bad;
  bad.initial_cash = 0.0;
  EXPECT_THROW(TradingEnv(s, 0, 9, bad), ConfigError);
  bad = {};
  bad.commission_rate = -0.1;
  EXPECT_THROW(TradingEnv(s, 0, 9, bad), ConfigError);
  const auto fm = build_feature_matrix(synthesize(SynthKind::Uptrend, 161, 0.01, 0), IndicatorParams{});
  EXPECT_THROW(TradingEnv::whole(s, fm, EnvConfig{}), std::exception);
}

TEST(TradingEnv, InvalidSellIsPenalizedWithoutTrade) {
  const auto s = synthesize(SynthKind::RandomWalk, 20, 0.02, 1);
  TradingEnv env(s, 0, 19, EnvConfig{});
  const auto st = env.reset();
  const auto [next, out] = env.step(st, Action::Sell);
  EXPECT_FALSE(out.valid);
  EXPECT_DOUBLE_EQ(out.reward, -0.05);
  EXPECT_EQ(next.cash, st.cash);
  EXPECT_EQ(next.shares, 0.0);
  EXPECT_EQ(next.position, 0);
  EXPECT_EQ(out.notional, 0.0);
  EXPECT_EQ(out.costs, 0.0);
}

TEST(TradingEnv, HoldInCashEarnsNothing) {
  const auto s = synthesize(SynthKind::RandomWalk, 20, 0.05, 2);
  TradingEnv env(s, 0, 19, EnvConfig{});
  auto st = env.reset();
  for (int i = 0; i < 19; ++i) {
    auto [next, out] = env.step(st, Action::Hold);
    EXPECT_EQ(out.reward, 0.0);
    EXPECT_EQ(out.done, i == 18);
    st = next;
  }
  EXPECT_THROW(env.step(st, Action::Hold), std::logic_error);
}

TEST(TradingEnv, UptrendBuyThenHoldEarnsOnePercent) {
  const auto s = synthesize(SynthKind::Uptrend, 30, 0.01, 0);
  TradingEnv env(s, 0, 29, zero_costs());
  auto [st, first] = env.step(env.reset(), Action::Buy);
  EXPECT_TRUE(first.valid);
  EXPECT_NEAR(first.reward, 0.01, 1e-12);
  EXPECT_EQ(st.position, 1);
  while (st.day < env.last_day()) {
    auto [next, out] = env.step(st, Action::Hold);
    EXPECT_NEAR(out.reward, 0.01, 1e-12);
    st = next;
  }
  // a second buy while invested is invalid and leaves holdings alone
  TradingEnv env2(s, 0, 29, zero_costs());
  auto [a, o1] = env2.step(env2.reset(), Action::Buy);
  auto [b, o2] = env2.step(a, Action::Buy);
  EXPECT_FALSE(o2.valid);
  EXPECT_EQ(b.shares, a.shares);
  EXPECT_EQ(b.cash, a.cash);
  EXPECT_NEAR(o2.reward, 0.01 - 0.05, 1e-12);
}

TEST(TradingEnv, CostsOnBuyAndSell) {
  const auto s = synthesize(SynthKind::Uptrend, 10, 0.0, 0);
  TradingEnv env(s, 0, 9, EnvConfig{});
  auto [a, buy] = env.step(env.reset(), Action::Buy);
  EXPECT_DOUBLE_EQ(buy.notional, 100000.0);
  EXPECT_DOUBLE_EQ(buy.costs, 150.0);
  EXPECT_DOUBLE_EQ(a.value, 99850.0);
  EXPECT_NEAR(buy.reward, -0.0015, 1e-15);
  auto [b, sell] = env.step(a, Action::Sell);
  EXPECT_DOUBLE_EQ(sell.notional, 99850.0);
  EXPECT_DOUBLE_EQ(sell.costs, 99850.0 * 0.0015);
  EXPECT_DOUBLE_EQ(b.cash, 99850.0 * (1 - 0.0015));
  EXPECT_EQ(b.position, 0);
}

// Random action sequences: accounting identity, no negative holdings,
// invalid actions never mutate the book, and log rewards telescope.
TEST(TradingEnv, RandomPoliciesKeepTheBooks) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = synthesize(SynthKind::RandomWalk, 60, 0.03, trial);
    EnvConfig cfg = zero_costs();
    cfg.invalid_penalty = 0.0;
    TradingEnv env(s, 0, 59, cfg);
    auto st = env.reset();
    double log_sum = 0.0;
    while (st.day < env.last_day()) {
      const auto action = static_cast<Action>(pick(rng));
      auto [next, out] = env.step(st, action);
      EXPECT_GE(next.cash, 0.0);
      EXPECT_GE(next.shares, 0.0);
      EXPECT_EQ(next.position == 1, next.shares > 0.0);
      EXPECT_NEAR(next.value, next.cash + next.shares * s.bars[next.day].adj_close, 1e-9 * next.value);
      if (!out.valid) {
        EXPECT_EQ(next.cash, st.cash);
        EXPECT_EQ(next.shares, st.shares);
        EXPECT_EQ(next.position, st.position);
      }
      log_sum += std::log1p(out.reward);
      st = next;
    }
    EXPECT_NEAR(log_sum, std::log(st.value / cfg.initial_cash), 1e-9);
  }
}

TEST(TradingEnv, BuyThenHoldReproducesBuyAndHold) {
  const auto s = synthesize(SynthKind::RandomWalk, 80, 0.02, 4);
  for (const EnvConfig& cfg : {zero_costs(), EnvConfig{}}) {
    TradingEnv env(s, 5, 79, cfg);
    const auto bh = buy_and_hold(s, 5, 79, cfg);
    auto st = env.reset();
    bool first = true;
    while (st.day < env.last_day()) {
      auto [next, out] = env.step(st, first ? Action::Buy : Action::Hold);
      first = false;
      st = next;
      EXPECT_NEAR(st.value, bh[st.day - 5], 1e-9 * bh[st.day - 5]);
    }
  }
}

TEST(BuyAndHold, ClosedForms) {
  const auto s = synthesize(SynthKind::RandomWalk, 50, 0.02, 5);
  const auto bh = buy_and_hold(s, zero_costs());
  ASSERT_EQ(bh.size(), 50u);
  for (std::size_t t = 0; t < 50; ++t)
    EXPECT_NEAR(bh[t], 100000.0 * s.bars[t].adj_close / s.bars[0].adj_close, 1e-9 * bh[t]);
  const auto flat = buy_and_hold(synthesize(SynthKind::Uptrend, 10, 0.0, 0), zero_costs());
  for (double v : flat) EXPECT_DOUBLE_EQ(v, 100000.0);
  const auto costly = buy_and_hold(s, EnvConfig{});
  EXPECT_DOUBLE_EQ(costly[0], 100000.0 * (1 - 0.001 - 0.0005));
  EXPECT_THROW(buy_and_hold(s, 10, 5, EnvConfig{}), DataError);
}

TEST(CumulativeReturn, Basics) {
  const std::vector<double> flat{5, 5, 5}, dbl{2, 3, 4}, rnd{1.7, 0.2, 9.1, 2.3};
  EXPECT_EQ(cumulative_return(flat), 0.0);
  EXPECT_EQ(cumulative_return(dbl), 1.0);
  EXPECT_EQ(cumulative_return(rnd), 2.3 / 1.7 - 1.0);
  EXPECT_THROW(cumulative_return(std::vector<double>{}), std::invalid_argument);
}

TEST(TradingEnv, ForRangeStartsAtFirstBuildableDay) {
  const auto s = synthesize(SynthKind::RandomWalk, 400, 0.02, 6);
  const auto fm = build_feature_matrix(s, IndicatorParams{});
  const auto env = TradingEnv::for_range(s, fm, {s.bars[0].date, s.bars[300].date}, EnvConfig{});
  EXPECT_EQ(env.first_day(), 160u);
  EXPECT_EQ(env.last_day(), 300u);
  const auto late = TradingEnv::for_range(s, fm, {s.bars[200].date, s.bars[399].date}, EnvConfig{});
  EXPECT_EQ(late.first_day(), 200u);
  EXPECT_EQ(TradingEnv::whole(s, fm, EnvConfig{}).last_day(), 399u);
}

TEST(TradeLog, WritesOneRowPerStep) {
  const auto s = synthesize(SynthKind::Uptrend, 5, 0.01, 0);
  std::vector<TradeLogRow> rows{{0, Action::Buy, true, 100, 1e5, 150, 0.0085, 100850},
                                {1, Action::Sell, true, 101, 1e5, 150, -0.001, 100700}};
  const auto path = std::filesystem::temp_directory_path() / "dqt_trades.csv";
  save_trade_log(rows, s, path);
  std::ifstream in(path);
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(header, "day,date,action,valid,price,notional,costs,reward,value");
  EXPECT_EQ(l1.substr(0, 20), "0,2000-01-03,buy,1,1");
  EXPECT_EQ(l2.substr(0, 21), "1,2000-01-04,sell,1,1");
  std::filesystem::remove(path);
}
