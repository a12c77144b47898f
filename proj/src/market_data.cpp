#include "dqt/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "dqt/error.hpp"

namespace dqt {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_price(const std::string& field, std::size_t line_no, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size() || !std::isfinite(v)) {
    throw DataError("row " + std::to_string(line_no) + ": cannot parse " + column + " value '" + field + "'");
  }
  return v;
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(text);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || text.size() != 10) {
    throw DataError("invalid date '" + text + "' (expected YYYY-MM-DD)");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw DataError("invalid calendar date '" + text + "'");
  return date;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

bool Bar::valid() const {
  const bool finite = std::isfinite(open) && std::isfinite(high) && std::isfinite(low) && std::isfinite(close) &&
                      std::isfinite(adj_close);
  if (!finite) return false;
  if (open <= 0 || high <= 0 || low <= 0 || close <= 0 || adj_close <= 0) return false;
  return low <= std::min(open, close) && std::max(open, close) <= high;
}

std::vector<double> PriceSeries::closes() const {
  std::vector<double> v(bars.size());
  std::transform(bars.begin(), bars.end(), v.begin(), [](const Bar& b) { return b.close; });
  return v;
}

std::vector<double> PriceSeries::highs() const {
  std::vector<double> v(bars.size());
  std::transform(bars.begin(), bars.end(), v.begin(), [](const Bar& b) { return b.high; });
  return v;
}

std::vector<double> PriceSeries::lows() const {
  std::vector<double> v(bars.size());
  std::transform(bars.begin(), bars.end(), v.begin(), [](const Bar& b) { return b.low; });
  return v;
}

std::vector<double> PriceSeries::adj_closes() const {
  std::vector<double> v(bars.size());
  std::transform(bars.begin(), bars.end(), v.begin(), [](const Bar& b) { return b.adj_close; });
  return v;
}

SplitSpec SplitSpec::defaults() {
  return SplitSpec{
      .train = {parse_date("2000-01-01"), parse_date("2005-12-31")},
      .test = {parse_date("2008-01-01"), parse_date("2016-12-31")},
      .validation = {parse_date("2016-01-01"), parse_date("2016-12-31")},
  };
}

PriceSeries parse_csv(std::string_view text, const std::string& ticker) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (lines.empty() || trim(lines[0]).empty()) throw DataError(ticker + ": missing header row");

  const auto header = split_fields(lines[0]);
  auto column = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(header[i]) == name) return i;
    }
    throw DataError(ticker + ": header lacks column '" + name + "'");
  };
  const std::size_t c_date = column("date"), c_open = column("open"), c_high = column("high"),
                    c_low = column("low"), c_close = column("close"), c_adj = column("adj close");
  const std::size_t needed = std::max({c_date, c_open, c_high, c_low, c_close, c_adj}) + 1;

  PriceSeries series{ticker, {}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() < needed) {
      throw DataError("row " + std::to_string(line_no) + ": expected at least " + std::to_string(needed) +
                      " fields, got " + std::to_string(fields.size()));
    }
    Bar bar;
    try {
      bar.date = parse_date(fields[c_date]);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(line_no) + ": " + e.what());
    }
    bar.open = parse_price(fields[c_open], line_no, "Open");
    bar.high = parse_price(fields[c_high], line_no, "High");
    bar.low = parse_price(fields[c_low], line_no, "Low");
    bar.close = parse_price(fields[c_close], line_no, "Close");
    bar.adj_close = parse_price(fields[c_adj], line_no, "Adj Close");
    if (!bar.valid()) {
      throw DataError("row " + std::to_string(line_no) + ": bar violates price invariants (" +
                      format_date(bar.date) + ")");
    }
    series.bars.push_back(bar);
  }
  if (series.bars.empty()) throw DataError(ticker + ": no data rows");

  std::stable_sort(series.bars.begin(), series.bars.end(),
                   [](const Bar& a, const Bar& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    if (series.bars[i].date == series.bars[i - 1].date) {
      throw DataError(ticker + ": duplicate date " + format_date(series.bars[i].date));
    }
  }
  return series;
}

PriceSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.stem().string());
}

std::string to_csv(const PriceSeries& series) {
  std::ostringstream out;
  out << "Date,Open,High,Low,Close,Adj Close\n";
  out << std::setprecision(17);
  for (const auto& b : series.bars) {
    out << format_date(b.date) << ',' << b.open << ',' << b.high << ',' << b.low << ',' << b.close << ','
        << b.adj_close << '\n';
  }
  return out.str();
}

void save_csv(const PriceSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(series);
}

PriceSeries slice(const PriceSeries& series, const DateRange& range, const std::string& range_name) {
  PriceSeries out{series.ticker, {}};
  std::copy_if(series.bars.begin(), series.bars.end(), std::back_inserter(out.bars),
               [&](const Bar& b) { return range.contains(b.date); });
  if (out.bars.empty()) {
    throw DataError(series.ticker + ": " + range_name + " range " + format_date(range.first) + ".." +
                    format_date(range.last) + " contains no bars");
  }
  return out;
}

SplitResult split(const PriceSeries& series, const SplitSpec& spec) {
  return SplitResult{
      .train = slice(series, spec.train, "train"),
      .test = slice(series, spec.test, "test"),
      .validation = slice(series, spec.validation, "validation"),
  };
}

std::pair<std::size_t, std::size_t> index_range(const PriceSeries& series, const DateRange& range) {
  auto first = std::find_if(series.bars.begin(), series.bars.end(),
                            [&](const Bar& b) { return range.contains(b.date); });
  if (first == series.bars.end()) {
    throw DataError(series.ticker + ": range " + format_date(range.first) + ".." + format_date(range.last) +
                    " contains no bars");
  }
  auto last = std::find_if(series.bars.rbegin(), series.bars.rend(),
                           [&](const Bar& b) { return range.contains(b.date); });
  return {static_cast<std::size_t>(first - series.bars.begin()),
          static_cast<std::size_t>(series.bars.rend() - last - 1)};
}

SynthKind parse_synth_kind(const std::string& name) {
  const auto n = lower(name);
  if (n == "uptrend") return SynthKind::Uptrend;
  if (n == "downtrend") return SynthKind::Downtrend;
  if (n == "sine") return SynthKind::Sine;
  if (n == "random_walk") return SynthKind::RandomWalk;
  throw std::invalid_argument("unknown synthetic kind '" + name + "'");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Uptrend: return "uptrend";
    case SynthKind::Downtrend: return "downtrend";
    case SynthKind::Sine: return "sine";
    case SynthKind::RandomWalk: return "random_walk";
  }
  return "?";
}

PriceSeries synthesize(SynthKind kind, int days, double rate, std::uint64_t seed) {
  if (days < 1) throw std::invalid_argument("synthesize: days must be positive");
  PriceSeries series{"SYN_" + to_string(kind), {}};
  series.bars.reserve(static_cast<std::size_t>(days));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  using namespace std::chrono;
  sys_days day = sys_days{year{2000} / January / 3};
  double walk = 100.0;
  for (int t = 0; t < days; ++t) {
    while (weekday{day} == Saturday || weekday{day} == Sunday) day += std::chrono::days{1};
    Bar bar;
    bar.date = year_month_day{day};
    switch (kind) {
      case SynthKind::Uptrend:
      case SynthKind::Downtrend: {
        const double growth = kind == SynthKind::Uptrend ? 1.0 + rate : 1.0 - rate;
        const double p = 100.0 * std::pow(growth, t);
        bar.open = bar.high = bar.low = bar.close = bar.adj_close = p;
        break;
      }
      case SynthKind::Sine: {
        const double p = 100.0 * (1.0 + rate * std::sin(2.0 * std::numbers::pi * t / 64.0));
        bar.open = bar.high = bar.low = bar.close = bar.adj_close = p;
        break;
      }
      case SynthKind::RandomWalk: {
        const double open = walk * std::exp(0.25 * rate * normal(rng));
        walk *= std::exp(rate * normal(rng));
        const double close = walk;
        bar.open = open;
        bar.close = close;
        bar.high = std::max(open, close) * (1.0 + 0.5 * rate * std::abs(normal(rng)));
        bar.low = std::min(open, close) * (1.0 - 0.5 * rate * std::min(1.0, std::abs(normal(rng))));
        bar.adj_close = close;
        break;
      }
    }
    series.bars.push_back(bar);
    day += std::chrono::days{1};
  }
  return series;
}

}  // namespace dqt
