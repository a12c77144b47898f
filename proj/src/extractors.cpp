#include "dqt/extractors.hpp"

#include <cmath>

#include "dqt/error.hpp"

namespace dqt {

void CnnConfig::validate() const {
  if (conv_channels.size() != 7) throw ConfigError("cnn: exactly 7 conv layers are required");
  for (auto c : conv_channels) {
    if (c == 0) throw ConfigError("cnn: conv channels must be positive");
  }
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("cnn: kernel must be odd");
  if (2 * padding + 1 != kernel) throw ConfigError("cnn: padding must keep the 9x9 extent (kernel = 2*padding+1)");
  for (auto w : fc_hidden) {
    if (w == 0) throw ConfigError("cnn: fc widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("cnn: dropout must be in [0, 1)");
  if (!(leaky_alpha >= 0.0)) throw ConfigError("cnn: leaky_alpha must be >= 0");
}

void LstmConfig::validate() const {
  if (hidden == 0) throw ConfigError("lstm: hidden must be positive");
  if (attention_dim == 0) throw ConfigError("lstm: attention_dim must be positive");
}

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : t.values()) x = dist(rng);
}

double kaiming_bound(std::size_t fan_in, double leaky_alpha) {
  return std::sqrt(6.0 / ((1.0 + leaky_alpha * leaky_alpha) * static_cast<double>(fan_in)));
}

Tensor image_tensor(const StateImage& img) {
  return Tensor({kChannels, kGridSide, kGridSide}, std::vector<double>(img.cells.begin(), img.cells.end()));
}

CnnBranch::CnnBranch(CnnConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) conv_names_.push_back("cnn.conv" + std::to_string(i));
  for (std::size_t i = 0; i <= config_.fc_hidden.size(); ++i) fc_names_.push_back("cnn.fc" + std::to_string(i));
}

void CnnBranch::add_params(ParamSet& params, std::mt19937_64& rng) const {
  const std::size_t k = config_.kernel;
  std::size_t in = kChannels;
  for (std::size_t i = 0; i < conv_names_.size(); ++i) {
    const std::size_t out = config_.conv_channels[i];
    auto& w = params.add(conv_names_[i] + ".weight", conv_names_[i], {out, in, k, k});
    init_uniform(w.value, kaiming_bound(in * k * k, config_.leaky_alpha), rng);
    params.add(conv_names_[i] + ".bias", conv_names_[i], {out});
    in = out;
  }
  std::size_t width = in * kCells;
  for (std::size_t i = 0; i < fc_names_.size(); ++i) {
    const std::size_t out = i < config_.fc_hidden.size() ? config_.fc_hidden[i] : kBranchFeatures;
    auto& w = params.add(fc_names_[i] + ".weight", fc_names_[i], {out, width});
    init_uniform(w.value, kaiming_bound(width, config_.leaky_alpha), rng);
    params.add(fc_names_[i] + ".bias", fc_names_[i], {out});
    width = out;
  }
}

Var CnnBranch::forward(Tape& tape, ParamSet& params, Var image, Mode mode, std::mt19937_64& rng) const {
  Var x = image;
  for (const auto& name : conv_names_) {
    x = ops::conv2d(tape, x, params.get(name + ".weight"), params.get(name + ".bias"), 1, config_.padding);
    x = ops::leaky_relu(tape, x, config_.leaky_alpha);
  }
  x = ops::reshape(tape, x, {tape.value(x).size()});
  for (std::size_t i = 0; i < fc_names_.size(); ++i) {
    x = ops::linear(tape, x, params.get(fc_names_[i] + ".weight"), params.get(fc_names_[i] + ".bias"));
    if (i + 1 < fc_names_.size()) {
      x = ops::leaky_relu(tape, x, config_.leaky_alpha);
      x = ops::dropout(tape, x, config_.dropout, mode, rng);
    }
  }
  return x;
}

LstmBranch::LstmBranch(LstmConfig config) : config_(config) { config_.validate(); }

void LstmBranch::add_params(ParamSet& params, std::mt19937_64& rng) const {
  const std::size_t H = config_.hidden, A = config_.attention_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(H));
  init_uniform(params.add("lstm.wx", "lstm", {4 * H, kCells}).value, bound, rng);
  init_uniform(params.add("lstm.wh", "lstm", {4 * H, H}).value, bound, rng);
  init_uniform(params.add("lstm.bias", "lstm", {4 * H}).value, bound, rng);
  init_uniform(params.add("attention.w", "attention", {A, H}).value, 0.1, rng);
  init_uniform(params.add("attention.v", "attention", {A}).value, 0.1, rng);
  init_uniform(params.add("lstm.proj.weight", "lstm", {kBranchFeatures, H}).value, bound, rng);
  params.add("lstm.proj.bias", "lstm", {kBranchFeatures});
}

LstmBranch::Output LstmBranch::forward(Tape& tape, ParamSet& params, Var image) const {
  Var seq = ops::reshape(tape, image, {kChannels, kCells});
  Var hs = ops::lstm_sequence(tape, seq, params.get("lstm.wx"), params.get("lstm.wh"), params.get("lstm.bias"));
  auto att = ops::additive_attention(tape, hs, params.get("attention.w"), params.get("attention.v"));
  Var features = ops::linear(tape, att.context, params.get("lstm.proj.weight"), params.get("lstm.proj.bias"));
  return {features, att.weights};
}

std::array<double, kStateDim> compose_state(std::span<const double> cnn8, std::span<const double> lstm8,
                                            double position) {
  if (cnn8.size() != kBranchFeatures || lstm8.size() != kBranchFeatures) {
    throw ShapeError("compose_state: branch outputs must have 8 values");
  }
  if (position != 0.0 && position != 1.0) throw std::invalid_argument("compose_state: position must be 0 or 1");
  std::array<double, kStateDim> s{};
  std::copy(cnn8.begin(), cnn8.end(), s.begin());
  std::copy(lstm8.begin(), lstm8.end(), s.begin() + kBranchFeatures);
  s[kStateDim - 1] = position;
  return s;
}

}  // namespace dqt
