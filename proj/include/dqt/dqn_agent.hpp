#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dqt/extractors.hpp"
#include "dqt/optim.hpp"
#include "dqt/state_builder.hpp"
#include "dqt/tape.hpp"
#include "dqt/trading_env.hpp"

namespace dqt {

struct DqnConfig {
  std::vector<std::size_t> hidden{128, 128, 128, 64, 64, 32};  // 6 hidden + output = 7 weight layers
  double dropout = 0.2;
  double leaky_alpha = 0.01;

  void validate() const;
};

struct NetworkConfig {
  CnnConfig cnn;
  LstmConfig lstm;
  DqnConfig dqn;

  void validate() const;
};

struct AgentConfig {
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_episodes = 1000;  // linear decay, per episode
  double tau = 0.005;

  void validate() const;
  double epsilon_at(int episode) const;
};

using QValues = std::array<double, kNumActions>;

/// Outputs of one composite forward pass.
struct ForwardPass {
  Var image;
  Var cnn;        // 8
  Var lstm;       // 8
  Var attention;  // 12
  Var state;      // 17
  Var q;          // 3
};

/// CNN branch + LSTM/attention branch feeding a 7-layer fully connected Q head.
class QNetwork {
 public:
  explicit QNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  const CnnBranch& cnn() const { return cnn_; }
  const LstmBranch& lstm() const { return lstm_; }

  /// Registers and initializes every parameter in a fixed order.
  ParamSet make_params(std::uint64_t seed) const;

  /// `image` must be a 12 x 9 x 9 tensor already on the tape.
  ForwardPass forward(Tape& tape, ParamSet& params, Var image, double position, Mode mode,
                      std::mt19937_64& rng) const;
  ForwardPass forward(Tape& tape, ParamSet& params, const StateImage& img, double position, Mode mode,
                      std::mt19937_64& rng) const;

  /// Eval-mode Q-values without recording.
  QValues q_values(ParamSet& params, const StateImage& img, double position) const;

 private:
  NetworkConfig config_;
  CnnBranch cnn_;
  LstmBranch lstm_;
  std::vector<std::string> dqn_names_;
};

/// epsilon-greedy: with probability epsilon a uniform action, otherwise the
/// argmax with ties going to the lowest index.
Action select_action(const QValues& q, double epsilon, std::mt19937_64& rng);
Action greedy_action(const QValues& q);

/// reward if done, else reward + gamma * max(next_q).
double td_target(double reward, const QValues& next_q_target, double gamma, bool done);

struct Transition {
  StateImage state;
  double position = 0.0;
  Action action = Action::Hold;
  double reward = 0.0;
  StateImage next_state;
  double next_position = 0.0;
  bool done = false;
};

struct TrainStepResult {
  double loss = 0.0;
  double predicted = 0.0;
  double target = 0.0;
  std::vector<double> component_norms;  // pre-clip, ordered as DqnAgent::components()
  double global_norm = 0.0;             // pre-clip
  double clipped_norm = 0.0;            // post-clip
};

/// Online and target composite networks with single-transition training.
class DqnAgent {
 public:
  DqnAgent(NetworkConfig network, AgentConfig agent, OptimizerConfig optim, std::uint64_t seed);
  /// Restores from saved parameter sets; `target` must match `online` in layout.
  DqnAgent(NetworkConfig network, AgentConfig agent, OptimizerConfig optim, ParamSet online, ParamSet target,
           std::mt19937_64 rng);

  /// Train-mode forward of the online network, kept for the learning update.
  struct Pass {
    Tape tape;
    ForwardPass out;
    QValues q{};
  };
  Pass begin_step(const StateImage& img, double position);

  /// MSE between Q(s, a) from `pass` and the TD target built with the target
  /// network (eval mode) on the next state, backward through every branch,
  /// global-norm clipping, AdamW, then a soft update of the whole target copy.
  /// Throws NumericError, leaving parameters untouched, on a non-finite loss.
  TrainStepResult finish_step(Pass&& pass, Action action, double reward, const StateImage& next_state,
                              double next_position, bool done, double lr);
  TrainStepResult train_step(const Transition& t, double lr);

  QValues target_q(const StateImage& img, double position);
  QValues online_q(const StateImage& img, double position);

  const QNetwork& network() const { return network_; }
  const AgentConfig& agent_config() const { return agent_; }
  const OptimizerConfig& optimizer_config() const { return optim_; }
  ParamSet& online() { return online_; }
  const ParamSet& online() const { return online_; }
  ParamSet& target() { return target_; }
  const ParamSet& target() const { return target_; }
  std::mt19937_64& rng() { return rng_; }
  const std::vector<std::string>& components() const { return components_; }

 private:
  QNetwork network_;
  AgentConfig agent_;
  OptimizerConfig optim_;
  ParamSet online_;
  ParamSet target_;
  std::mt19937_64 rng_;
  std::vector<std::string> components_;
  std::vector<std::size_t> component_of_param_;
};

}  // namespace dqt
