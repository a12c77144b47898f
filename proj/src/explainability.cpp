#include "dqt/explainability.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "dqt/error.hpp"

namespace dqt {

SaliencyMap input_saliency(const QNetwork& network, ParamSet& params, const StateImage& img, double position,
                           Action action) {
  Tape tape(Tape::Options{.record = true, .param_grads = false});
  std::mt19937_64 unused;
  const Var x = tape.input(image_tensor(img));
  const auto out = network.forward(tape, params, x, position, Mode::Eval, unused);
  const Var qa = ops::pick(tape, out.q, static_cast<std::size_t>(action));
  tape.backward(qa);
  const Tensor& g = tape.grad(x);
  SaliencyMap map;
  map.anchor = img.anchor;
  map.action = action;
  for (std::size_t i = 0; i < kImageSize; ++i) map.values[i] = std::abs(g[i]);
  return map;
}

std::vector<AttentionRow> attention_trace(const QNetwork& network, ParamSet& params, const FeatureMatrix& fm,
                                          std::size_t first, std::size_t last, const NormalizationSpec& spec) {
  if (last < first) throw std::invalid_argument("attention_trace: empty day range");
  std::vector<AttentionRow> rows;
  rows.reserve(last - first + 1);
  for (std::size_t d = first; d <= last; ++d) {
    Tape tape(Tape::Options{.record = false, .param_grads = false});
    const auto out = network.lstm().forward(tape, params, tape.constant(image_tensor(build_state(fm, d, spec))));
    const Tensor& w = tape.value(out.attention);
    AttentionRow row{};
    std::copy(w.data(), w.data() + kNumFeatures, row.begin());
    rows.push_back(row);
  }
  return rows;
}

GradNormTracker::GradNormTracker(std::vector<std::string> components, double threshold, std::size_t patience)
    : components_(std::move(components)), threshold_(threshold), patience_(patience), run_(components_.size(), 0) {
  if (patience_ == 0) throw std::invalid_argument("GradNormTracker: patience must be >= 1");
}

std::optional<std::string> GradNormTracker::record(std::size_t step, const TrainStepResult& result) {
  if (result.component_norms.size() != components_.size()) {
    throw ShapeError("GradNormTracker: expected " + std::to_string(components_.size()) + " component norms");
  }
  records_.push_back({step, result.component_norms, result.global_norm});
  std::optional<std::string> warning;
  for (std::size_t c = 0; c < components_.size(); ++c) {
    run_[c] = result.component_norms[c] < threshold_ ? run_[c] + 1 : 0;
    if (run_[c] == patience_ && !warning) {
      warning = "vanishing gradient: " + components_[c] + " norm below " + std::to_string(threshold_) + " for " +
                std::to_string(patience_) + " consecutive steps (step " + std::to_string(step) + ")";
    }
  }
  if (warning) warnings_.push_back(*warning);
  return warning;
}

std::array<std::string, kStateDim> InputWeightSummary::labels() {
  std::array<std::string, kStateDim> out;
  for (std::size_t i = 0; i < kBranchFeatures; ++i) {
    out[i] = "cnn_" + std::to_string(i);
    out[kBranchFeatures + i] = "lstm_" + std::to_string(i);
  }
  out[kStateDim - 1] = "position";
  return out;
}

InputWeightSummary input_weight_summary(const ParamSet& params) {
  const Tensor& w = params.get("dqn.fc0.weight").value;
  if (w.rank() != 2 || w.dim(1) != kStateDim) throw ShapeError("first DQN layer must take 17 inputs");
  const std::size_t rows = w.dim(0);
  InputWeightSummary s;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < kStateDim; ++c) s.values[c] += std::abs(w[r * kStateDim + c]);
  }
  for (double& v : s.values) v /= static_cast<double>(rows);
  return s;
}

std::optional<std::string> collapse_warning(const InputWeightSummary& summary, double threshold) {
  const auto* v = summary.values.data();
  const double cnn = std::accumulate(v, v + kBranchFeatures, 0.0) / kBranchFeatures;
  const double lstm = std::accumulate(v + kBranchFeatures, v + 2 * kBranchFeatures, 0.0) / kBranchFeatures;
  std::string which;
  if (cnn < threshold) which = "cnn";
  if (lstm < threshold) which += which.empty() ? "lstm" : " and lstm";
  if (which.empty()) return std::nullopt;
  return "model collapse: Q head is ignoring the " + which + " features (mean |w| below " +
         std::to_string(threshold) + ")";
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

void save_saliency_csv(const SaliencyMap& map, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "channel,row,col,value\n";
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t r = 0; r < kGridSide; ++r) {
      for (std::size_t k = 0; k < kGridSide; ++k) out << c << ',' << r << ',' << k << ',' << map.at(c, r, k) << '\n';
    }
  }
}

void save_attention_csv(std::span<const AttentionRow> rows, std::span<const std::size_t> days,
                        const PriceSeries& series, const std::filesystem::path& path) {
  if (rows.size() != days.size()) throw std::invalid_argument("save_attention_csv: rows and days differ in length");
  auto out = open_csv(path);
  out << "day,date";
  for (const auto& name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << days[i] << ',' << format_date(series.bars.at(days[i]).date);
    for (double w : rows[i]) out << ',' << w;
    out << '\n';
  }
}

void write_gradnorm_header(std::ostream& out, const std::vector<std::string>& components) {
  out << "step";
  for (const auto& c : components) out << ',' << c;
  out << ",global\n";
}

void write_gradnorm_row(std::ostream& out, const GradNormRecord& record) {
  out << record.step;
  for (double n : record.component_norms) out << ',' << n;
  out << ',' << record.global_norm << '\n';
}

void save_gradnorms_csv(const GradNormTracker& tracker, const std::filesystem::path& path) {
  auto out = open_csv(path);
  write_gradnorm_header(out, tracker.components());
  for (const auto& r : tracker.records()) write_gradnorm_row(out, r);
}

void save_weights_csv(const InputWeightSummary& summary, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "input_name,value\n";
  const auto labels = InputWeightSummary::labels();
  for (std::size_t i = 0; i < kStateDim; ++i) out << labels[i] << ',' << summary.values[i] << '\n';
}

}  // namespace dqt
