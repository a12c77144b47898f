#include "dqt/dqn_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dqt/error.hpp"
#include "dqt/kernels.hpp"

namespace dqt {

void DqnConfig::validate() const {
  if (hidden.size() != 6) throw ConfigError("dqn: exactly 6 hidden layers (7 weight layers) are required");
  for (auto w : hidden) {
    if (w == 0) throw ConfigError("dqn: hidden widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dqn: dropout must be in [0, 1)");
  if (!(leaky_alpha >= 0.0)) throw ConfigError("dqn: leaky_alpha must be >= 0");
}

void NetworkConfig::validate() const {
  cnn.validate();
  lstm.validate();
  dqn.validate();
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent: gamma must be in [0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("agent: epsilon must be in [0, 1]");
  }
  if (epsilon_decay_episodes < 1) throw ConfigError("agent: epsilon_decay_episodes must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("agent: tau must be in (0, 1]");
}

double AgentConfig::epsilon_at(int episode) const {
  if (episode >= epsilon_decay_episodes) return epsilon_end;
  const double frac = static_cast<double>(std::max(episode, 0)) / epsilon_decay_episodes;
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

QNetwork::QNetwork(NetworkConfig config)
    : config_(std::move(config)), cnn_(config_.cnn), lstm_(config_.lstm) {
  config_.validate();
  for (std::size_t i = 0; i <= config_.dqn.hidden.size(); ++i) dqn_names_.push_back("dqn.fc" + std::to_string(i));
}

ParamSet QNetwork::make_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParamSet params;
  cnn_.add_params(params, rng);
  lstm_.add_params(params, rng);
  std::size_t width = kStateDim;
  for (std::size_t i = 0; i < dqn_names_.size(); ++i) {
    const std::size_t out = i < config_.dqn.hidden.size() ? config_.dqn.hidden[i] : kNumActions;
    auto& w = params.add(dqn_names_[i] + ".weight", dqn_names_[i], {out, width});
    init_uniform(w.value, kaiming_bound(width, config_.dqn.leaky_alpha), rng);
    params.add(dqn_names_[i] + ".bias", dqn_names_[i], {out});
    width = out;
  }
  return params;
}

ForwardPass QNetwork::forward(Tape& tape, ParamSet& params, Var image, double position, Mode mode,
                              std::mt19937_64& rng) const {
  if (position != 0.0 && position != 1.0) throw std::invalid_argument("position must be 0 or 1");
  ForwardPass out;
  out.image = image;
  out.cnn = cnn_.forward(tape, params, image, mode, rng);
  const auto l = lstm_.forward(tape, params, image);
  out.lstm = l.features;
  out.attention = l.attention;
  const Var pos = tape.constant(Tensor({1}, {position}));
  const std::array<Var, 3> parts{out.cnn, out.lstm, pos};
  out.state = ops::concat(tape, parts);
  Var x = out.state;
  for (std::size_t i = 0; i < dqn_names_.size(); ++i) {
    x = ops::linear(tape, x, params.get(dqn_names_[i] + ".weight"), params.get(dqn_names_[i] + ".bias"));
    if (i + 1 < dqn_names_.size()) {
      x = ops::leaky_relu(tape, x, config_.dqn.leaky_alpha);
      x = ops::dropout(tape, x, config_.dqn.dropout, mode, rng);
    }
  }
  out.q = x;
  return out;
}

ForwardPass QNetwork::forward(Tape& tape, ParamSet& params, const StateImage& img, double position, Mode mode,
                              std::mt19937_64& rng) const {
  return forward(tape, params, tape.constant(image_tensor(img)), position, mode, rng);
}

QValues QNetwork::q_values(ParamSet& params, const StateImage& img, double position) const {
  Tape tape(Tape::Options{.record = false, .param_grads = false});
  std::mt19937_64 unused;
  const auto out = forward(tape, params, img, position, Mode::Eval, unused);
  const Tensor& q = tape.value(out.q);
  return {q[0], q[1], q[2]};
}

Action greedy_action(const QValues& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return static_cast<Action>(best);
}

Action select_action(const QValues& q, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (uniform(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(kNumActions) - 1);
    return static_cast<Action>(pick(rng));
  }
  return greedy_action(q);
}

double td_target(double reward, const QValues& next_q_target, double gamma, bool done) {
  if (done) return reward;
  return reward + gamma * *std::max_element(next_q_target.begin(), next_q_target.end());
}

DqnAgent::DqnAgent(NetworkConfig network, AgentConfig agent, OptimizerConfig optim, std::uint64_t seed)
    : DqnAgent(network, agent, optim, QNetwork(network).make_params(seed), ParamSet{},
               std::mt19937_64(seed ^ 0x9E3779B97F4A7C15ull)) {}

DqnAgent::DqnAgent(NetworkConfig network, AgentConfig agent, OptimizerConfig optim, ParamSet online,
                   ParamSet target, std::mt19937_64 rng)
    : network_(std::move(network)),
      agent_(agent),
      optim_(optim),
      online_(std::move(online)),
      target_(std::move(target)),
      rng_(rng) {
  agent_.validate();
  optim_.validate();
  if (target_.count() == 0) target_ = online_.clone_values();
  if (!target_.same_layout(online_)) throw ShapeError("target parameters do not match the online network");
  if (!network_.make_params(0).same_layout(online_)) {
    throw ShapeError("parameters do not match the network configuration");
  }
  components_ = online_.components();
  for (const auto& p : online_) {
    component_of_param_.push_back(static_cast<std::size_t>(
        std::find(components_.begin(), components_.end(), p.component) - components_.begin()));
  }
}

DqnAgent::Pass DqnAgent::begin_step(const StateImage& img, double position) {
  Pass pass;
  pass.out = network_.forward(pass.tape, online_, img, position, Mode::Train, rng_);
  const Tensor& q = pass.tape.value(pass.out.q);
  pass.q = {q[0], q[1], q[2]};
  return pass;
}

QValues DqnAgent::target_q(const StateImage& img, double position) {
  return network_.q_values(target_, img, position);
}

QValues DqnAgent::online_q(const StateImage& img, double position) {
  return network_.q_values(online_, img, position);
}

TrainStepResult DqnAgent::finish_step(Pass&& pass, Action action, double reward, const StateImage& next_state,
                                      double next_position, bool done, double lr) {
  TrainStepResult r;
  const auto a = static_cast<std::size_t>(action);
  r.predicted = pass.q[a];
  const QValues next_q = done ? QValues{} : target_q(next_state, next_position);
  r.target = td_target(reward, next_q, agent_.gamma, done);
  if (!std::isfinite(r.predicted) || !std::isfinite(r.target)) {
    throw NumericError("non-finite Q estimate (predicted " + std::to_string(r.predicted) + ", target " +
                       std::to_string(r.target) + ")");
  }

  Tape& tape = pass.tape;
  const Var qa = ops::pick(tape, pass.out.q, a);
  const Var loss = ops::mse(tape, qa, r.target);
  r.loss = tape.value(loss)[0];
  online_.zero_grad();
  tape.backward(loss);

  std::vector<double> sq(components_.size(), 0.0);
  for (std::size_t i = 0; i < online_.count(); ++i) {
    const Tensor& g = online_[i].grad;
    if (!g.empty()) sq[component_of_param_[i]] += kernels::sum_squares(g.values());
  }
  double total = 0.0;
  r.component_norms.resize(sq.size());
  for (std::size_t c = 0; c < sq.size(); ++c) {
    r.component_norms[c] = std::sqrt(sq[c]);
    total += sq[c];
  }
  r.global_norm = std::sqrt(total);
  if (!std::isfinite(r.global_norm)) throw NumericError("non-finite gradient norm");

  r.clipped_norm = r.global_norm * scale_gradients_to(online_, r.global_norm, optim_.clip_max_norm);
  adamw_step(online_, optim_, lr);
  soft_update(target_, online_, agent_.tau);
  return r;
}

TrainStepResult DqnAgent::train_step(const Transition& t, double lr) {
  return finish_step(begin_step(t.state, t.position), t.action, t.reward, t.next_state, t.next_position, t.done, lr);
}

}  // namespace dqt
