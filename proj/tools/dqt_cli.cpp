// dqt: data prep, training, evaluation, baselines, explainability and plots.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 bad config.
// Failures print one line to stderr:  dqt: error code=<n> kind=<kind> msg="<text>"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "dqt/checkpoint.hpp"
#include "dqt/config.hpp"
#include "dqt/error.hpp"
#include "dqt/explainability.hpp"
#include "dqt/svg.hpp"
#include "dqt/trainer.hpp"

namespace fs = std::filesystem;
using namespace dqt;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

TrainConfig resolve_config(const Shared& s) {
  TrainConfig c = s.config.empty() ? TrainConfig{} : load_config(s.config);
  if (s.seed) c.seed = *s.seed;
  if (!s.out.empty()) c.output_dir = s.out;
  return c;
}

fs::path out_dir(const Shared& s, const char* fallback) {
  fs::path p = s.out.empty() ? fs::path(fallback) : fs::path(s.out);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

const Window& pick_window(const PreparedTicker& t, const TrainConfig& c, const std::string& split) {
  const std::string phase = c.use_splits ? split : "all";
  const Window* w = t.window(phase);
  if (!w) throw DataError(t.name + ": no tradable days in split '" + split + "'");
  return *w;
}

Action parse_action(const std::string& s) {
  if (s == "hold") return Action::Hold;
  if (s == "sell") return Action::Sell;
  if (s == "buy") return Action::Buy;
  throw UsageError("action must be hold, sell or buy");
}

// Minimal reader for the CSV files this tool writes: header plus rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("missing column '" + name + "'");
  }
  std::vector<double> numbers(std::size_t col) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(col < r.size() ? std::stod(r[col]) : NAN);
    return out;
  }
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

int cmd_ingest(const Shared& s, const std::string& input, const std::string& synth, int days, double rate) {
  const fs::path dir = out_dir(s, ".");
  PriceSeries series;
  if (!synth.empty()) {
    series = synthesize(parse_synth_kind(synth), days, rate, s.seed.value_or(0));
    series.ticker = synth;
  } else {
    if (input.empty()) throw UsageError("ingest needs --input or --synth");
    series = load_csv(input);
  }
  save_csv(series, dir / (series.ticker + ".csv"));
  std::cout << "ticker=" << series.ticker << " bars=" << series.size() << " first="
            << format_date(series.bars.front().date) << " last=" << format_date(series.bars.back().date) << '\n';
  if (!synth.empty()) return 0;
  const TrainConfig c = resolve_config(s);
  const std::pair<const char*, DateRange> phases[] = {
      {"train", c.splits.train}, {"test", c.splits.test}, {"validation", c.splits.validation}};
  for (const auto& [phase, range] : phases) {
    try {
      const PriceSeries part = slice(series, range, phase);
      save_csv(part, dir / (series.ticker + "_" + phase + ".csv"));
      std::cout << phase << "=" << part.size() << '\n';
    } catch (const DataError& e) {
      std::cout << phase << "=0 (" << e.what() << ")\n";
    }
  }
  return 0;
}

int cmd_features(const Shared& s, const std::string& ticker, const std::string& date) {
  const TrainConfig c = resolve_config(s);
  const fs::path dir = out_dir(s, ".");
  const PriceSeries series = TickerSource{ticker}.load();
  const FeatureMatrix fm = build_feature_matrix(series, c.indicators);
  save_feature_csv(fm, series, dir / "features.csv");
  std::size_t day = first_buildable_day(fm);
  if (!date.empty()) {
    const Date d = parse_date(date);
    const auto it = std::find_if(series.bars.begin(), series.bars.end(), [&](const Bar& b) { return b.date == d; });
    if (it == series.bars.end()) throw DataError("date " + date + " not in series");
    day = static_cast<std::size_t>(it - series.bars.begin());
  }
  save_state_csv(build_state(fm, day, c.normalization), dir / "state.csv");
  std::cout << "features=" << (dir / "features.csv").string() << " state_day=" << format_date(series.bars[day].date)
            << '\n';
  return 0;
}

int cmd_train(const Shared& s, int episodes, const std::vector<std::string>& tickers) {
  TrainConfig c = resolve_config(s);
  if (episodes > 0) c.episodes = episodes;
  if (!tickers.empty()) {
    c.tickers.clear();
    for (const auto& t : tickers) c.tickers.push_back({t});
  }
  c.validate();
  TrainObserver obs;
  obs.on_episode = [](const EpisodeSummary& e) {
    std::cout << "episode=" << e.episode << " ticker=" << e.ticker << " epsilon=" << e.epsilon
              << " return=" << e.cumulative_return << " trades=" << e.trades << " invalid=" << e.invalid
              << " loss=" << e.mean_loss << '\n';
  };
  const TrainResult r = run_training(c, obs);
  std::cout << "steps=" << r.total_steps << " checkpoint=" << r.final_checkpoint.string() << '\n';
  return 0;
}

int cmd_evaluate(const Shared& s, const std::string& ckpt, const std::string& split,
                 const std::vector<std::string>& tickers) {
  TrainConfig c = resolve_config(s);
  if (!tickers.empty()) {
    c.tickers.clear();
    for (const auto& t : tickers) c.tickers.push_back({t});
  }
  c.validate();
  const fs::path dir = out_dir(s, "eval");
  DqnAgent agent = restore_agent(c, ckpt);
  std::vector<EvalResult> results;
  for (const auto& src : c.tickers) {
    const PreparedTicker t = prepare_ticker(src.load(), c);
    const Window& w = pick_window(t, c, split);
    EvalResult r = evaluate(agent.network(), agent.online(), w, c.env);
    const std::string stem = t.name + "_" + w.phase;
    save_eval_curve(r, *t.series, dir / (stem + "_curve.csv"));
    save_trade_log(r.trades, *t.series, dir / (stem + "_trades.csv"));
    save_q_trace(r, *t.series, dir / (stem + "_q.csv"));
    std::vector<std::size_t> days(r.days.begin(), r.days.end() - 1);
    save_attention_csv(r.attention, days, *t.series, dir / (stem + "_attention.csv"));
    std::cout << "ticker=" << t.name << " split=" << w.phase << " agent_return=" << r.cumulative_return()
              << " buy_and_hold_return=" << r.buy_and_hold_return() << " trades=" << r.trade_count << '\n';
    results.push_back(std::move(r));
  }
  save_comparison(results, dir / "comparison.csv");
  return 0;
}

int cmd_baseline(const Shared& s, const std::string& ticker_file, const std::string& split, bool zero_costs) {
  TrainConfig c = resolve_config(s);
  if (zero_costs) c.env.commission_rate = c.env.impact_rate = 0.0;
  const fs::path dir = out_dir(s, ".");
  const PreparedTicker t = prepare_ticker(TickerSource{ticker_file}.load(), c);
  const Window& w = pick_window(t, c, split);
  const auto curve = buy_and_hold(*t.series, w.first, w.last, c.env);
  auto out = open_out(dir / (t.name + "_baseline.csv"));
  out << "day,date,adj_close,value\n";
  for (std::size_t d = w.first; d <= w.last; ++d) {
    out << d << ',' << format_date(t.series->bars[d].date) << ',' << t.series->bars[d].adj_close << ','
        << curve[d - w.first] << '\n';
  }
  std::cout << "ticker=" << t.name << " split=" << w.phase << " buy_and_hold_return=" << cumulative_return(curve)
            << '\n';
  return 0;
}

int cmd_explain(const Shared& s, const std::string& ckpt, const std::string& split, const std::string& ticker,
                const std::string& date, const std::string& action, const std::string& gradnorms) {
  TrainConfig c = resolve_config(s);
  if (!ticker.empty()) c.tickers = {{ticker}};
  c.validate();
  const fs::path dir = out_dir(s, "explain");
  DqnAgent agent = restore_agent(c, ckpt);
  const PreparedTicker t = prepare_ticker(c.tickers.front().load(), c);
  const Window& w = pick_window(t, c, split);

  std::size_t day = w.last;
  if (!date.empty()) {
    const Date d = parse_date(date);
    day = w.first;
    while (day <= w.last && t.series->bars[day].date != d) ++day;
    if (day > w.last) throw DataError("date " + date + " is not a trading day in the window");
  }
  const QValues q = agent.online_q(w.image(day), 0.0);
  const Action a = action.empty() ? greedy_action(q) : parse_action(action);
  save_saliency_csv(input_saliency(agent.network(), agent.online(), w.image(day), 0.0, a), dir / "saliency.csv");

  const auto rows = attention_trace(agent.network(), agent.online(), *t.features, w.first, w.last, c.normalization);
  std::vector<std::size_t> days;
  for (std::size_t d = w.first; d <= w.last; ++d) days.push_back(d);
  save_attention_csv(rows, days, *t.series, dir / "attention.csv");

  const auto summary = input_weight_summary(agent.online());
  save_weights_csv(summary, dir / "weights.csv");
  if (auto warn = collapse_warning(summary)) std::cout << "warning: " << *warn << '\n';
  if (!gradnorms.empty()) fs::copy_file(gradnorms, dir / "gradnorms.csv", fs::copy_options::overwrite_existing);
  std::cout << "saliency_day=" << format_date(t.series->bars[day].date) << " action=" << to_string(a)
            << " attention_rows=" << rows.size() << '\n';
  return 0;
}

int cmd_plot(const Shared& s, const std::string& input, const std::string& kind, const std::string& output) {
  const Table t = read_table(input);
  const fs::path out = output.empty() ? fs::path(out_dir(s, ".")) / (fs::path(input).stem().string() + ".svg")
                                      : fs::path(output);
  std::string doc;
  if (kind == "curve") {
    std::vector<svg::LineSeries> series;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (t.header[c] == "value" || t.header[c] == "buy_and_hold") series.push_back({t.header[c], t.numbers(c)});
    }
    if (series.empty()) throw DataError("curve plot needs a value or buy_and_hold column");
    doc = svg::line_plot("Portfolio value", series);
  } else if (kind == "gradnorms") {
    std::vector<svg::LineSeries> series;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      auto y = t.numbers(c);
      for (double& v : y) v = v > 0 ? std::log10(v) : NAN;
      series.push_back({t.header[c], y});
    }
    doc = svg::line_plot("Gradient norms (log10)", series);
  } else if (kind == "attention") {
    // Features down the side, days across.
    std::vector<std::vector<double>> grid(t.header.size() - 2);
    std::vector<std::string> rows(t.header.begin() + 2, t.header.end()), cols;
    for (const auto& r : t.rows) cols.push_back(r.at(1));
    for (std::size_t c = 2; c < t.header.size(); ++c) grid[c - 2] = t.numbers(c);
    doc = svg::heatmap("Attention weights", grid, rows, cols);
  } else if (kind == "saliency") {
    const std::size_t ch = t.column("channel"), rr = t.column("row"), cc = t.column("col"), vv = t.column("value");
    std::vector<std::vector<double>> grid(kChannels, std::vector<double>(kCells, 0.0));
    for (const auto& r : t.rows) {
      grid.at(std::stoul(r[ch])).at(std::stoul(r[rr]) * kGridSide + std::stoul(r[cc])) = std::stod(r[vv]);
    }
    std::vector<std::string> rows(kFeatureNames.begin(), kFeatureNames.end()), cols;
    for (std::size_t k = 0; k < kCells; ++k) cols.push_back("t-" + std::to_string(kCells - 1 - k));
    doc = svg::heatmap("Input saliency |dQ/dx|", grid, rows, cols);
  } else if (kind == "weights") {
    std::vector<std::string> labels;
    for (const auto& r : t.rows) labels.push_back(r.at(0));
    doc = svg::bar_chart("Mean |w| of the first DQN layer", labels, t.numbers(1));
  } else {
    throw UsageError("unknown plot kind '" + kind + "' (curve, gradnorms, attention, saliency, weights)");
  }
  svg::write_file(out, doc);
  std::cout << "svg=" << out.string() << '\n';
  return 0;
}

int fail(int code, const char* kind, const std::string& msg) {
  std::string clean = msg;
  std::replace(clean.begin(), clean.end(), '\n', ' ');
  std::replace(clean.begin(), clean.end(), '"', '\'');
  std::cerr << "dqt: error code=" << code << " kind=" << kind << " msg=\"" << clean << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dqt: CNN + LSTM-attention + DQN trading agent"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Shared shared;
  app.add_option("--config", shared.config, "JSON training config");
  app.add_option("--seed", shared.seed, "Seed for every random draw (overrides the config)");
  app.add_option("--out", shared.out, "Output directory");

  std::string input, synth, ticker, ckpt, split = "test", date, action, kind = "curve", output, gradnorms;
  std::vector<std::string> tickers;
  int days = 500, episodes = 0;
  double rate = 0.01;
  bool zero_costs = false;

  auto* ingest = app.add_subcommand("ingest", "Validate a daily-bar CSV and write per-split files");
  ingest->add_option("--input", input, "CSV with Date, Open, High, Low, Close, Adj Close");
  ingest->add_option("--synth", synth, "Synthesize instead: uptrend, downtrend, sine or random_walk");
  ingest->add_option("--days", days, "Synthetic length in business days");
  ingest->add_option("--rate", rate, "Synthetic daily rate");

  auto* features = app.add_subcommand("features", "Write the feature matrix and one state image");
  features->add_option("--ticker", ticker, "CSV path or synth:<kind>[:days[:rate[:seed]]]")->required();
  features->add_option("--date", date, "Anchor day of the state image (default: first buildable)");

  auto* train = app.add_subcommand("train", "Train the agent");
  train->add_option("--episodes", episodes, "Override the episode count");
  train->add_option("--ticker", tickers, "Override the ticker list (repeatable)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Greedy evaluation against buy-and-hold");
  evaluate_cmd->add_option("--checkpoint", ckpt)->required();
  evaluate_cmd->add_option("--split", split, "train, test or validation")->check(
      CLI::IsMember({"train", "test", "validation"}));
  evaluate_cmd->add_option("--ticker", tickers, "Override the ticker list (repeatable)");

  auto* baseline = app.add_subcommand("baseline", "Buy-and-hold curve for one ticker");
  baseline->add_option("--ticker-file", ticker, "CSV path or synth spec")->required();
  baseline->add_option("--split", split)->check(CLI::IsMember({"train", "test", "validation"}));
  baseline->add_flag("--zero-costs", zero_costs, "Ignore commission and impact");

  auto* explain = app.add_subcommand("explain", "Saliency, attention trace and input-weight summary");
  explain->add_option("--checkpoint", ckpt)->required();
  explain->add_option("--split", split)->check(CLI::IsMember({"train", "test", "validation"}));
  explain->add_option("--ticker", ticker, "Ticker to explain (default: first in config)");
  explain->add_option("--date", date, "Saliency day (default: last day of the window)");
  explain->add_option("--action", action, "Saliency action: hold, sell or buy (default: greedy)");
  explain->add_option("--gradnorms", gradnorms, "gradnorms.csv from a training run to include");

  auto* plot = app.add_subcommand("plot", "Render a CSV written by this tool as SVG");
  plot->add_option("--input", input)->required();
  plot->add_option("--kind", kind, "curve, gradnorms, attention, saliency or weights");
  plot->add_option("--output", output, "SVG path (default: <out>/<input stem>.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    if (*ingest) return cmd_ingest(shared, input, synth, days, rate);
    if (*features) return cmd_features(shared, ticker, date);
    if (*train) return cmd_train(shared, episodes, tickers);
    if (*evaluate_cmd) return cmd_evaluate(shared, ckpt, split, tickers);
    if (*baseline) return cmd_baseline(shared, ticker, split, zero_costs);
    if (*explain) return cmd_explain(shared, ckpt, split, ticker, date, action, gradnorms);
    if (*plot) return cmd_plot(shared, input, kind, output);
  } catch (const UsageError& e) {
    return fail(2, "usage", e.what());
  } catch (const ConfigError& e) {
    return fail(3, "config", e.what());
  } catch (const std::exception& e) {
    return fail(1, "runtime", e.what());
  }
  return fail(2, "usage", "no subcommand");
}
