#pragma once

// Reverse-mode differentiation over a closed set of layers. Each op computes
// its forward value immediately and, when the tape is recording, registers a
// closure that propagates output gradients to its inputs and parameters.

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "dqt/tensor.hpp"

namespace dqt {

enum class Mode { Train, Eval };

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

class Tape {
 public:
  struct Options {
    bool record = true;       // keep backward closures
    bool param_grads = true;  // accumulate into Parameter::grad during backward
  };

  Tape() = default;
  explicit Tape(Options options) : options_(options) {}

  bool recording() const { return options_.record; }
  bool param_grads() const { return options_.param_grads; }

  /// Leaf that receives a gradient (e.g. the input image for saliency).
  Var input(Tensor value);
  /// Leaf excluded from gradient propagation.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Gradient of the last backward() output w.r.t. `v`.
  const Tensor& grad(Var v) const;

  /// Seeds d(output)/d(output) = seed for a single-element output and runs
  /// the recorded closures in reverse. Throws std::logic_error when nothing
  /// was recorded or backward already ran.
  void backward(Var output, double seed = 1.0);

  // Op-authoring interface.
  Var add_node(Tensor value, bool requires_grad = true);
  void on_backward(std::function<void(Tape&)> fn);
  Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }
  /// Parameter gradient buffer to accumulate into, or nullptr when disabled.
  Tensor* param_grad(Parameter& p);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = true;
  };
  Options options_{};
  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&)>> closures_;
  bool backward_done_ = false;
};

namespace ops {

/// Cross-correlation of a C x H x W input with M x C x k x k weights.
Var conv2d(Tape& tape, Var x, Parameter& weight, Parameter& bias, std::size_t stride, std::size_t padding);
/// y = W x + b for a 1-D x.
Var linear(Tape& tape, Var x, Parameter& weight, Parameter& bias);
Var leaky_relu(Tape& tape, Var x, double alpha = 0.01);
/// Inverted dropout. Eval mode and p == 0 return `x` itself. Throws for p outside [0, 1).
Var dropout(Tape& tape, Var x, double p, Mode mode, std::mt19937_64& rng);
Var reshape(Tape& tape, Var x, Shape shape);
Var concat(Tape& tape, std::span<const Var> parts);
/// Single element of a 1-D tensor, as a 1-element tensor.
Var pick(Tape& tape, Var x, std::size_t index);
/// (pred - target)^2 for a 1-element pred.
Var mse(Tape& tape, Var pred, double target);

struct LstmState {
  Var h;
  Var c;
};
/// One LSTM cell step. Gate rows of wx (4H x D), wh (4H x H) and bias (4H) are
/// ordered input, forget, candidate, output.
LstmState lstm_step(Tape& tape, Var x, Var h, Var c, Parameter& wx, Parameter& wh, Parameter& bias);
/// Runs the cell over the rows of xs (T x D) from zero state; returns all hidden states (T x H).
Var lstm_sequence(Tape& tape, Var xs, Parameter& wx, Parameter& wh, Parameter& bias);

struct Attention {
  Var context;  // H
  Var weights;  // T, softmax over steps
};
/// score_t = v . tanh(W h_t); weights = softmax(score); context = sum_t weights_t h_t.
Attention additive_attention(Tape& tape, Var hiddens, Parameter& w, Parameter& v);

}  // namespace ops

}  // namespace dqt
