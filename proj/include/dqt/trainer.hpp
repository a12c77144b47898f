#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dqt/dqn_agent.hpp"
#include "dqt/indicators.hpp"
#include "dqt/market_data.hpp"
#include "dqt/state_builder.hpp"
#include "dqt/trading_env.hpp"

namespace dqt {

/// Where a ticker's bars come from: a CSV path, or a synthetic fixture written
/// as "synth:<kind>[:days[:rate[:seed]]]" (kind = uptrend, downtrend, sine, random_walk).
struct TickerSource {
  std::string spec;

  bool synthetic() const;
  std::string name() const;
  PriceSeries load() const;
};

struct TrainConfig {
  int episodes = 2000;
  int eval_every = 25;
  std::vector<TickerSource> tickers;
  std::uint64_t seed = 0;
  /// When false every phase (training and evaluation) uses the whole series.
  bool use_splits = true;
  SplitSpec splits = SplitSpec::defaults();
  IndicatorParams indicators;
  NormalizationSpec normalization = NormalizationSpec::defaults();
  EnvConfig env;
  AgentConfig agent;
  OptimizerConfig optimizer;
  NetworkConfig network;
  std::filesystem::path output_dir = "run";
  bool write_step_log = true;

  void validate() const;
};

/// Bars, features and cached state images for one evaluation or training window.
struct Window {
  std::string ticker;
  std::string phase;  // train, test, validation or all
  std::shared_ptr<const PriceSeries> series;
  std::shared_ptr<const FeatureMatrix> features;
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<StateImage> images;  // images[d - first] for d in [first, last]

  const StateImage& image(std::size_t day) const { return images.at(day - first); }
  std::size_t steps() const { return last - first; }
};

/// A loaded ticker with its features and windows for each phase.
struct PreparedTicker {
  std::string name;
  std::shared_ptr<const PriceSeries> series;
  std::shared_ptr<const FeatureMatrix> features;
  std::vector<Window> windows;

  const Window* window(const std::string& phase) const;
};

/// Builds features on the full history (so indicator warm-up may use bars before a
/// window) and caches every state image inside each phase window.
PreparedTicker prepare_ticker(const PriceSeries& series, const TrainConfig& config);

struct StepRecord {
  int episode = 0;
  std::size_t step = 0;
  std::size_t day = 0;
  int position = 0;
  double epsilon = 0.0;
  Action action = Action::Hold;
  bool valid = true;
  double reward = 0.0;
  double value = 0.0;  // after the step, marked at the next day
  QValues q{};
  TrainStepResult train;
};

struct EpisodeSummary {
  int episode = 0;
  std::string ticker;
  double epsilon = 0.0;
  double learning_rate = 0.0;
  std::size_t steps = 0;
  double cumulative_return = 0.0;
  int trades = 0;
  int invalid = 0;
  double mean_loss = 0.0;
  double final_value = 0.0;
};

struct EvalResult {
  std::string ticker;
  std::string phase;
  std::vector<std::size_t> days;          // first..last
  std::vector<double> values;             // portfolio value at each day
  std::vector<double> buy_and_hold;       // same days
  std::vector<TradeLogRow> trades;        // one per step
  std::vector<std::array<double, kNumFeatures>> attention;  // one per step
  std::vector<QValues> q;                 // one per step
  int trade_count = 0;
  int invalid_count = 0;

  double cumulative_return() const;
  double buy_and_hold_return() const;
};

/// Greedy (epsilon = 0), eval-mode roll-out over a window. Throws std::logic_error
/// if the parameters change.
EvalResult evaluate(const QNetwork& network, ParamSet& params, const Window& window, const EnvConfig& env);

struct EvalRow {
  int episode = 0;
  std::string ticker;
  std::string phase;
  double cumulative_return = 0.0;
  double buy_and_hold_return = 0.0;
  int trades = 0;
  int invalid = 0;
};

struct TrainObserver {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpisodeSummary&)> on_episode;
  std::function<void(const EvalRow&)> on_eval;
};

struct TrainResult {
  std::vector<EpisodeSummary> episodes;
  std::vector<EvalRow> evals;
  std::filesystem::path final_checkpoint;
  std::size_t total_steps = 0;
};

/// Sequential training: episode e is one pass over ticker[e mod n]'s training
/// window. Writes episodes.csv, steps.csv (optional), gradnorms.csv, evals.csv,
/// checkpoints/epNNNNN.ckpt at each evaluation point and final.ckpt into the output dir.
/// A non-finite loss aborts the run after writing failure.json.
TrainResult run_training(const TrainConfig& config, const TrainObserver& observer = {});

/// Builds an agent for `config` and restores it from `ckpt_path`.
DqnAgent restore_agent(const TrainConfig& config, const std::filesystem::path& ckpt_path);

void save_eval_curve(const EvalResult& result, const PriceSeries& series, const std::filesystem::path& path);
void save_q_trace(const EvalResult& result, const PriceSeries& series, const std::filesystem::path& path);
void save_comparison(const std::vector<EvalResult>& results, const std::filesystem::path& path);

}  // namespace dqt
