#include "dqt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dqt/checkpoint.hpp"
#include "dqt/config.hpp"
#include "dqt/error.hpp"
#include "dqt/explainability.hpp"

namespace dqt {

namespace {

constexpr std::string_view kSynthPrefix = "synth:";

std::vector<std::string> split_colons(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  return parts;
}

template <class T>
T parse_number(const std::string& text, const std::string& spec) {
  std::istringstream in(text);
  T v{};
  if (!(in >> v) || !in.eof()) throw ConfigError("bad number '" + text + "' in ticker " + spec);
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

bool TickerSource::synthetic() const { return spec.starts_with(kSynthPrefix); }

std::string TickerSource::name() const {
  if (!synthetic()) return std::filesystem::path(spec).stem().string();
  std::string n = spec;
  std::replace(n.begin(), n.end(), ':', '_');
  return n;
}

PriceSeries TickerSource::load() const {
  if (!synthetic()) {
    PriceSeries s = load_csv(spec);
    s.ticker = name();
    return s;
  }
  const auto parts = split_colons(spec);
  if (parts.size() < 2 || parts.size() > 5) throw ConfigError("ticker " + spec + ": expected synth:<kind>[:days[:rate[:seed]]]");
  SynthKind kind;
  try {
    kind = parse_synth_kind(parts[1]);
  } catch (const std::exception& e) {
    throw ConfigError("ticker " + spec + ": " + e.what());
  }
  const int days = parts.size() > 2 ? parse_number<int>(parts[2], spec) : 500;
  const double rate = parts.size() > 3 ? parse_number<double>(parts[3], spec) : 0.01;
  const auto seed = parts.size() > 4 ? parse_number<std::uint64_t>(parts[4], spec) : 0;
  PriceSeries s = synthesize(kind, days, rate, seed);
  s.ticker = name();
  return s;
}

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (tickers.empty()) throw ConfigError("at least one ticker is required");
  indicators.validate();
  env.validate();
  agent.validate();
  optimizer.validate();
  network.validate();
}

const Window* PreparedTicker::window(const std::string& phase) const {
  for (const auto& w : windows) {
    if (w.phase == phase) return &w;
  }
  return nullptr;
}

PreparedTicker prepare_ticker(const PriceSeries& series, const TrainConfig& config) {
  PreparedTicker t;
  t.name = series.ticker;
  t.series = std::make_shared<const PriceSeries>(series);
  t.features = std::make_shared<const FeatureMatrix>(build_feature_matrix(series, config.indicators));
  const std::size_t buildable = first_buildable_day(*t.features);

  auto add_window = [&](const std::string& phase, std::size_t lo, std::size_t hi) {
    Window w;
    w.ticker = t.name;
    w.phase = phase;
    w.series = t.series;
    w.features = t.features;
    w.first = std::max(lo, buildable);
    w.last = hi;
    if (w.last <= w.first) return false;
    t.windows.push_back(std::move(w));
    return true;
  };

  if (!config.use_splits) {
    if (!add_window("all", 0, series.size() - 1)) throw DataError(t.name + ": no tradable days after warm-up");
  } else {
    const std::pair<const char*, const DateRange*> phases[] = {
        {"train", &config.splits.train}, {"test", &config.splits.test}, {"validation", &config.splits.validation}};
    for (const auto& [phase, range] : phases) {
      bool added = false;
      try {
        const auto [lo, hi] = index_range(series, *range);
        added = add_window(phase, lo, hi);
      } catch (const DataError&) {
      }
      if (!added && std::string_view(phase) == "train") {
        throw DataError(t.name + ": train range has no tradable days after warm-up");
      }
    }
  }
  for (auto& w : t.windows) {
    w.images.reserve(w.last - w.first + 1);
    for (std::size_t d = w.first; d <= w.last; ++d) w.images.push_back(build_state(*t.features, d, config.normalization));
  }
  return t;
}

double EvalResult::cumulative_return() const { return dqt::cumulative_return(values); }
double EvalResult::buy_and_hold_return() const { return dqt::cumulative_return(buy_and_hold); }

EvalResult evaluate(const QNetwork& network, ParamSet& params, const Window& window, const EnvConfig& env_config) {
  const std::uint64_t before = params.checksum();
  const TradingEnv env(*window.series, window.first, window.last, env_config);
  EvalResult r;
  r.ticker = window.ticker;
  r.phase = window.phase;
  r.buy_and_hold = buy_and_hold(*window.series, window.first, window.last, env_config);
  PortfolioState state = env.reset();
  r.days.push_back(state.day);
  r.values.push_back(state.value);
  std::mt19937_64 unused;
  while (state.day < env.last_day()) {
    Tape tape(Tape::Options{.record = false, .param_grads = false});
    const auto out = network.forward(tape, params, window.image(state.day), state.position, Mode::Eval, unused);
    const Tensor& q = tape.value(out.q);
    const QValues qv{q[0], q[1], q[2]};
    const Tensor& att = tape.value(out.attention);
    AttentionRow row{};
    std::copy(att.data(), att.data() + kNumFeatures, row.begin());
    const Action a = greedy_action(qv);
    const auto [next, o] = env.step(state, a);
    r.q.push_back(qv);
    r.attention.push_back(row);
    r.trades.push_back({state.day, a, o.valid, o.price, o.notional, o.costs, o.reward, next.value});
    if (o.valid && a != Action::Hold) ++r.trade_count;
    if (!o.valid) ++r.invalid_count;
    state = next;
    r.days.push_back(state.day);
    r.values.push_back(state.value);
  }
  if (params.checksum() != before) throw std::logic_error("evaluate modified the parameters");
  return r;
}

DqnAgent restore_agent(const TrainConfig& config, const std::filesystem::path& ckpt_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  return DqnAgent(config.network, config.agent, config.optimizer, std::move(ck.online), std::move(ck.target),
                  Checkpoint::decode_rng(ck.rng_state));
}

void save_eval_curve(const EvalResult& r, const PriceSeries& series, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "day,date,value,buy_and_hold\n";
  for (std::size_t i = 0; i < r.days.size(); ++i) {
    out << r.days[i] << ',' << format_date(series.bars.at(r.days[i]).date) << ',' << r.values[i] << ','
        << r.buy_and_hold[i] << '\n';
  }
}

void save_q_trace(const EvalResult& r, const PriceSeries& series, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "day,date,q_hold,q_sell,q_buy,action\n";
  for (std::size_t i = 0; i < r.q.size(); ++i) {
    const std::size_t d = r.trades[i].day;
    out << d << ',' << format_date(series.bars.at(d).date) << ',' << r.q[i][0] << ',' << r.q[i][1] << ','
        << r.q[i][2] << ',' << to_string(r.trades[i].action) << '\n';
  }
}

void save_comparison(const std::vector<EvalResult>& results, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "ticker,phase,agent_return,buy_and_hold_return,excess_return,trades,invalid\n";
  for (const auto& r : results) {
    out << r.ticker << ',' << r.phase << ',' << r.cumulative_return() << ',' << r.buy_and_hold_return() << ','
        << r.cumulative_return() - r.buy_and_hold_return() << ',' << r.trade_count << ',' << r.invalid_count
        << '\n';
  }
}

namespace {

void write_failure(const std::filesystem::path& path, const StepRecord& rec, const std::string& ticker,
                   const std::string& message) {
  auto out = open_out(path);
  out << "{\n  \"error\": \"" << message << "\",\n  \"episode\": " << rec.episode << ",\n  \"ticker\": \"" << ticker
      << "\",\n  \"step\": " << rec.step << ",\n  \"day\": " << rec.day << ",\n  \"position\": " << rec.position
      << ",\n  \"action\": \"" << to_string(rec.action) << "\",\n  \"reward\": " << rec.reward
      << ",\n  \"q\": [" << rec.q[0] << ", " << rec.q[1] << ", " << rec.q[2] << "]\n}\n";
}

Checkpoint make_checkpoint(const DqnAgent& agent, const TrainConfig& config, int episodes_done, double lr) {
  TrainConfig stored = config;
  stored.output_dir.clear();  // keeps checkpoints independent of where a run writes
  Checkpoint ck;
  ck.online = agent.online();
  ck.target = agent.target();
  ck.episode = episodes_done;
  ck.learning_rate = lr;
  ck.rng_state = Checkpoint::encode_rng(const_cast<DqnAgent&>(agent).rng());
  ck.config_json = dump_config(stored);
  return ck;
}

}  // namespace

TrainResult run_training(const TrainConfig& config, const TrainObserver& observer) {
  config.validate();
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  {
    TrainConfig stored = config;
    auto out = open_out(dir / "config.json");
    out << dump_config(stored) << '\n';
  }

  std::vector<PreparedTicker> tickers;
  for (const auto& src : config.tickers) tickers.push_back(prepare_ticker(src.load(), config));

  DqnAgent agent(config.network, config.agent, config.optimizer, config.seed);
  GradNormTracker tracker(agent.components());

  auto episodes_csv = open_out(dir / "episodes.csv");
  episodes_csv << "episode,ticker,epsilon,learning_rate,steps,cumulative_return,trades,invalid,mean_loss,final_value\n";
  auto gradnorm_csv = open_out(dir / "gradnorms.csv");
  write_gradnorm_header(gradnorm_csv, agent.components());
  auto evals_csv = open_out(dir / "evals.csv");
  evals_csv << "episode,ticker,phase,cumulative_return,buy_and_hold_return,trades,invalid\n";
  auto warnings_log = open_out(dir / "warnings.log");
  std::ofstream steps_csv;
  if (config.write_step_log) {
    steps_csv = open_out(dir / "steps.csv");
    steps_csv << "episode,step,day,date,position,epsilon,action,valid,reward,value,q_hold,q_sell,q_buy,loss";
    for (const auto& c : agent.components()) steps_csv << ',' << c;
    steps_csv << ",global_norm\n";
  }

  TrainResult result;
  std::size_t global_step = 0;
  for (int e = 0; e < config.episodes; ++e) {
    const PreparedTicker& t = tickers[static_cast<std::size_t>(e) % tickers.size()];
    const Window& w = *t.window(config.use_splits ? "train" : "all");
    const TradingEnv env(*t.series, w.first, w.last, config.env);
    const double epsilon = config.agent.epsilon_at(e);
    const double lr = config.optimizer.lr_at(e);

    EpisodeSummary summary;
    summary.episode = e;
    summary.ticker = t.name;
    summary.epsilon = epsilon;
    summary.learning_rate = lr;
    double loss_sum = 0.0;

    PortfolioState state = env.reset();
    const double start_value = state.value;
    std::size_t step = 0;
    while (state.day < env.last_day()) {
      StepRecord rec;
      rec.episode = e;
      rec.step = step;
      rec.day = state.day;
      rec.position = state.position;
      rec.epsilon = epsilon;
      auto pass = agent.begin_step(w.image(state.day), state.position);
      rec.q = pass.q;
      rec.action = select_action(pass.q, epsilon, agent.rng());
      const auto [next, outcome] = env.step(state, rec.action);
      if (outcome.next_day <= state.day) throw std::logic_error("training days must strictly increase");
      rec.valid = outcome.valid;
      rec.reward = outcome.reward;
      rec.value = next.value;
      try {
        rec.train = agent.finish_step(std::move(pass), rec.action, outcome.reward, w.image(outcome.next_day),
                                      next.position, outcome.done, lr);
      } catch (const NumericError& err) {
        write_failure(dir / "failure.json", rec, t.name, err.what());
        throw;
      }
      if (!std::isfinite(rec.train.loss)) {
        write_failure(dir / "failure.json", rec, t.name, "non-finite loss");
        throw NumericError("non-finite loss at episode " + std::to_string(e) + " step " + std::to_string(step));
      }

      if (auto warn = tracker.record(global_step, rec.train)) warnings_log << *warn << '\n';
      write_gradnorm_row(gradnorm_csv, tracker.records().back());
      tracker.clear_records();
      if (config.write_step_log) {
        steps_csv << e << ',' << step << ',' << rec.day << ',' << format_date(t.series->bars[rec.day].date) << ','
                  << rec.position << ',' << epsilon << ',' << to_string(rec.action) << ',' << (rec.valid ? 1 : 0)
                  << ',' << rec.reward << ',' << rec.value << ',' << rec.q[0] << ',' << rec.q[1] << ',' << rec.q[2]
                  << ',' << rec.train.loss;
        for (double n : rec.train.component_norms) steps_csv << ',' << n;
        steps_csv << ',' << rec.train.global_norm << '\n';
      }
      if (observer.on_step) observer.on_step(rec);

      loss_sum += rec.train.loss;
      if (rec.valid && rec.action != Action::Hold) ++summary.trades;
      if (!rec.valid) ++summary.invalid;
      state = next;
      ++step;
      ++global_step;
    }
    summary.steps = step;
    summary.final_value = state.value;
    summary.cumulative_return = state.value / start_value - 1.0;
    summary.mean_loss = step > 0 ? loss_sum / static_cast<double>(step) : 0.0;
    episodes_csv << e << ',' << t.name << ',' << epsilon << ',' << lr << ',' << summary.steps << ','
                 << summary.cumulative_return << ',' << summary.trades << ',' << summary.invalid << ','
                 << summary.mean_loss << ',' << summary.final_value << '\n';
    episodes_csv.flush();
    if (observer.on_episode) observer.on_episode(summary);
    result.episodes.push_back(summary);

    const bool last = e + 1 == config.episodes;
    if ((e + 1) % config.eval_every == 0 || last) {
      for (const auto& pt : tickers) {
        for (const auto& win : pt.windows) {
          const EvalResult ev = evaluate(agent.network(), agent.online(), win, config.env);
          EvalRow row{e, pt.name, win.phase, ev.cumulative_return(), ev.buy_and_hold_return(), ev.trade_count,
                      ev.invalid_count};
          evals_csv << row.episode << ',' << row.ticker << ',' << row.phase << ',' << row.cumulative_return << ','
                    << row.buy_and_hold_return << ',' << row.trades << ',' << row.invalid << '\n';
          if (observer.on_eval) observer.on_eval(row);
          result.evals.push_back(row);
        }
      }
      evals_csv.flush();
      const auto summary_w = input_weight_summary(agent.online());
      if (auto warn = collapse_warning(summary_w)) warnings_log << "episode " << e << ": " << *warn << '\n';
      std::ostringstream name;
      name << "ep" << std::setw(5) << std::setfill('0') << e + 1 << ".ckpt";
      std::filesystem::create_directories(dir / "checkpoints");
      save_checkpoint(make_checkpoint(agent, config, e + 1, lr), dir / "checkpoints" / name.str());
      if (last) {
        result.final_checkpoint = dir / "final.ckpt";
        save_checkpoint(make_checkpoint(agent, config, e + 1, lr), result.final_checkpoint);
      }
    }
  }
  result.total_steps = global_step;
  return result;
}

}  // namespace dqt
