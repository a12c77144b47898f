#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dqt/state_builder.hpp"
#include "dqt/tape.hpp"
#include "dqt/tensor.hpp"

namespace dqt {

inline constexpr std::size_t kBranchFeatures = 8;
inline constexpr std::size_t kStateDim = 2 * kBranchFeatures + 1;

struct CnnConfig {
  std::vector<std::size_t> conv_channels{24, 24, 48, 48, 96, 96, 96};  // exactly seven conv layers
  std::size_t kernel = 3;
  std::size_t padding = 1;
  std::vector<std::size_t> fc_hidden{256, 64};
  double dropout = 0.2;
  double leaky_alpha = 0.01;

  void validate() const;
};

struct LstmConfig {
  std::size_t hidden = 256;
  std::size_t attention_dim = 64;

  void validate() const;
};

/// Seven 3x3 convolutions (LeakyReLU) over the 12 x 9 x 9 image, flatten,
/// fully connected hidden layers with LeakyReLU and dropout, then 8 outputs.
class CnnBranch {
 public:
  explicit CnnBranch(CnnConfig config);

  const CnnConfig& config() const { return config_; }
  void add_params(ParamSet& params, std::mt19937_64& rng) const;
  /// `image` must be a 12 x 9 x 9 tensor; returns an 8-vector.
  Var forward(Tape& tape, ParamSet& params, Var image, Mode mode, std::mt19937_64& rng) const;

 private:
  CnnConfig config_;
  std::vector<std::string> conv_names_;
  std::vector<std::string> fc_names_;
};

/// Single-layer LSTM over the image read as 12 steps of 81 features, additive
/// attention over the 12 hidden states, and a linear projection to 8 outputs.
class LstmBranch {
 public:
  explicit LstmBranch(LstmConfig config);

  struct Output {
    Var features;   // 8
    Var attention;  // 12, sums to one
  };

  const LstmConfig& config() const { return config_; }
  void add_params(ParamSet& params, std::mt19937_64& rng) const;
  /// `image` is the same 12 x 9 x 9 tensor the CNN sees; it is read as 12 x 81.
  Output forward(Tape& tape, ParamSet& params, Var image) const;

 private:
  LstmConfig config_;
};

/// [cnn 0..7, lstm 0..7, position]; position must be 0 or 1.
std::array<double, kStateDim> compose_state(std::span<const double> cnn8, std::span<const double> lstm8,
                                            double position);

Tensor image_tensor(const StateImage& img);

/// Uniform in [-bound, bound].
void init_uniform(Tensor& t, double bound, std::mt19937_64& rng);
/// Kaiming-style fan-in bound for LeakyReLU layers.
double kaiming_bound(std::size_t fan_in, double leaky_alpha);

}  // namespace dqt
