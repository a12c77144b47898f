#include "dqt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dqt/error.hpp"
#include "dqt/kernels.hpp"

namespace dqt {

Var Tape::add_node(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad});
  return Var{nodes_.size() - 1};
}

Var Tape::input(Tensor value) { return add_node(std::move(value), true); }

Var Tape::constant(Tensor value) { return add_node(std::move(value), false); }

void Tape::on_backward(std::function<void(Tape&)> fn) {
  if (options_.record) closures_.push_back(std::move(fn));
}

Tensor* Tape::param_grad(Parameter& p) { return options_.param_grads ? &p.ensure_grad() : nullptr; }

const Tensor& Tape::grad(Var v) const {
  if (!backward_done_) throw std::logic_error("gradient requested before backward()");
  return nodes_.at(v.id).grad;
}

void Tape::backward(Var output, double seed) {
  if (!options_.record) throw std::logic_error("backward() on a non-recording tape");
  if (nodes_.empty() || !output.valid()) throw std::logic_error("backward() before any forward computation");
  if (backward_done_) throw std::logic_error("backward() already ran on this tape");
  if (nodes_.at(output.id).value.size() != 1) throw ShapeError("backward() needs a single-element output");
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  nodes_[output.id].grad[0] = seed;
  for (auto it = closures_.rbegin(); it != closures_.rend(); ++it) (*it)(*this);
  backward_done_ = true;
}

namespace ops {

namespace {

void expect(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var conv2d(Tape& tape, Var x, Parameter& weight, Parameter& bias, std::size_t stride, std::size_t padding) {
  const Tensor& in = tape.value(x);
  const Tensor& w = weight.value;
  expect(in.rank() == 3, "conv2d: input must be C x H x W, got " + shape_string(in.shape()));
  expect(w.rank() == 4 && w.dim(2) == w.dim(3), "conv2d: weight must be M x C x k x k");
  expect(w.dim(1) == in.dim(0), "conv2d: weight " + shape_string(w.shape()) + " vs input " + shape_string(in.shape()));
  expect(bias.value.size() == w.dim(0), "conv2d: bias length");
  expect(stride >= 1, "conv2d: stride must be >= 1");
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), M = w.dim(0), k = w.dim(2);
  expect(H + 2 * padding >= k && W + 2 * padding >= k, "conv2d: kernel larger than padded input");
  const std::size_t Ho = kernels::conv_out_extent(H, k, stride, padding);
  const std::size_t Wo = kernels::conv_out_extent(W, k, stride, padding);
  const std::size_t K = C * k * k, N = Ho * Wo;

  auto col = std::make_shared<std::vector<double>>(K * N);
  kernels::im2col(C, H, W, k, stride, padding, in.data(), col->data());
  Tensor out({M, Ho, Wo});
  for (std::size_t m = 0; m < M; ++m) std::fill_n(out.data() + m * N, N, bias.value[m]);
  kernels::gemm(M, N, K, w.data(), K, col->data(), N, out.data(), N, true);

  Var y = tape.add_node(std::move(out));
  tape.on_backward([=, &weight, &bias](Tape& t) {
    const Tensor& dy = t.grad_mut(y);
    if (Tensor* db = t.param_grad(bias)) {
      for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) s += dy[m * N + n];
        (*db)[m] += s;
      }
    }
    if (Tensor* dw = t.param_grad(weight)) {
      kernels::gemm_nt(M, K, N, dy.data(), N, col->data(), N, dw->data(), K, true);
    }
    if (t.requires_grad(x)) {
      std::vector<double> dcol(K * N);
      kernels::gemm_tn(K, N, M, weight.value.data(), K, dy.data(), N, dcol.data(), N, false);
      kernels::col2im(C, H, W, k, stride, padding, dcol.data(), t.grad_mut(x).data());
    }
  });
  return y;
}

Var linear(Tape& tape, Var x, Parameter& weight, Parameter& bias) {
  const Tensor& in = tape.value(x);
  const Tensor& w = weight.value;
  expect(w.rank() == 2 && w.dim(1) == in.size(),
         "linear: weight " + shape_string(w.shape()) + " vs input " + shape_string(in.shape()));
  expect(bias.value.size() == w.dim(0), "linear: bias length");
  const std::size_t M = w.dim(0), N = w.dim(1);
  Tensor out({M});
  std::copy_n(bias.value.data(), M, out.data());
  kernels::gemv(M, N, w.data(), in.data(), out.data(), true);

  Var y = tape.add_node(std::move(out));
  tape.on_backward([=, &weight, &bias](Tape& t) {
    const Tensor& dy = t.grad_mut(y);
    if (Tensor* db = t.param_grad(bias)) {
      for (std::size_t m = 0; m < M; ++m) (*db)[m] += dy[m];
    }
    double* dx = t.requires_grad(x) ? t.grad_mut(x).data() : nullptr;
    if (Tensor* dw = t.param_grad(weight)) {
      kernels::linear_backward(M, N, weight.value.data(), t.value(x).data(), dy.data(), dw->data(), dx);
    } else if (dx) {
      kernels::gemv_t(M, N, weight.value.data(), dy.data(), dx, true);
    }
  });
  return y;
}

Var leaky_relu(Tape& tape, Var x, double alpha) {
  const Tensor& in = tape.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= 0.0 ? in[i] : alpha * in[i];
  Var y = tape.add_node(std::move(out));
  tape.on_backward([=](Tape& t) {
    if (!t.requires_grad(x)) return;
    const Tensor& v = t.value(x);
    const Tensor& dy = t.grad_mut(y);
    Tensor& dx = t.grad_mut(x);
    for (std::size_t i = 0; i < v.size(); ++i) dx[i] += v[i] >= 0.0 ? dy[i] : alpha * dy[i];
  });
  return y;
}

Var dropout(Tape& tape, Var x, double p, Mode mode, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (mode == Mode::Eval || p == 0.0) return x;
  const Tensor& in = tape.value(x);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(in.size());
  for (auto& m : mask) m = uniform(rng) >= p ? keep_scale : 0.0;
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * mask[i];
  Var y = tape.add_node(std::move(out));
  tape.on_backward([=, mask = std::move(mask)](Tape& t) {
    if (!t.requires_grad(x)) return;
    const Tensor& dy = t.grad_mut(y);
    Tensor& dx = t.grad_mut(x);
    for (std::size_t i = 0; i < mask.size(); ++i) dx[i] += dy[i] * mask[i];
  });
  return y;
}

Var reshape(Tape& tape, Var x, Shape shape) {
  Tensor out = tape.value(x);
  out.reshape(std::move(shape));
  Var y = tape.add_node(std::move(out));
  tape.on_backward([=](Tape& t) {
    if (!t.requires_grad(x)) return;
    const Tensor& dy = t.grad_mut(y);
    Tensor& dx = t.grad_mut(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
  return y;
}

Var concat(Tape& tape, std::span<const Var> parts) {
  std::vector<Var> vars(parts.begin(), parts.end());
  std::size_t total = 0;
  for (Var v : vars) total += tape.value(v).size();
  Tensor out({total});
  std::size_t offset = 0;
  for (Var v : vars) {
    const Tensor& t = tape.value(v);
    std::copy_n(t.data(), t.size(), out.data() + offset);
    offset += t.size();
  }
  Var y = tape.add_node(std::move(out));
  tape.on_backward([=](Tape& t) {
    const Tensor& dy = t.grad_mut(y);
    std::size_t off = 0;
    for (Var v : vars) {
      const std::size_t n = t.value(v).size();
      if (t.requires_grad(v)) {
        Tensor& dx = t.grad_mut(v);
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[off + i];
      }
      off += n;
    }
  });
  return y;
}

Var pick(Tape& tape, Var x, std::size_t index) {
  const Tensor& in = tape.value(x);
  expect(index < in.size(), "pick: index out of range");
  Var y = tape.add_node(Tensor({1}, {in[index]}));
  tape.on_backward([=](Tape& t) {
    if (t.requires_grad(x)) t.grad_mut(x)[index] += t.grad_mut(y)[0];
  });
  return y;
}

Var mse(Tape& tape, Var pred, double target) {
  const Tensor& p = tape.value(pred);
  expect(p.size() == 1, "mse: prediction must be a single value");
  const double diff = p[0] - target;
  Var y = tape.add_node(Tensor({1}, {diff * diff}));
  tape.on_backward([=](Tape& t) {
    if (t.requires_grad(pred)) t.grad_mut(pred)[0] += 2.0 * diff * t.grad_mut(y)[0];
  });
  return y;
}

LstmState lstm_step(Tape& tape, Var x, Var h, Var c, Parameter& wx, Parameter& wh, Parameter& bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& hv = tape.value(h);
  const Tensor& cv = tape.value(c);
  const std::size_t H = hv.size(), D = xv.size();
  expect(cv.size() == H, "lstm_step: h and c sizes differ");
  expect(wx.value.rank() == 2 && wx.value.dim(0) == 4 * H && wx.value.dim(1) == D, "lstm_step: wx shape");
  expect(wh.value.rank() == 2 && wh.value.dim(0) == 4 * H && wh.value.dim(1) == H, "lstm_step: wh shape");
  expect(bias.value.size() == 4 * H, "lstm_step: bias length");

  auto gates = std::make_shared<std::vector<double>>(4 * H);
  std::copy_n(bias.value.data(), 4 * H, gates->data());
  kernels::gemv(4 * H, D, wx.value.data(), xv.data(), gates->data(), true);
  kernels::gemv(4 * H, H, wh.value.data(), hv.data(), gates->data(), true);
  auto& g = *gates;
  Tensor h_out({H}), c_out({H});
  for (std::size_t j = 0; j < H; ++j) {
    g[j] = sigmoid(g[j]);
    g[H + j] = sigmoid(g[H + j]);
    g[2 * H + j] = std::tanh(g[2 * H + j]);
    g[3 * H + j] = sigmoid(g[3 * H + j]);
    c_out[j] = g[H + j] * cv[j] + g[j] * g[2 * H + j];
    h_out[j] = g[3 * H + j] * std::tanh(c_out[j]);
  }
  Var hn = tape.add_node(std::move(h_out));
  Var cn = tape.add_node(std::move(c_out));
  tape.on_backward([=, &wx, &wh, &bias](Tape& t) {
    const auto& a = *gates;
    const Tensor& dh = t.grad_mut(hn);
    const Tensor& dc_in = t.grad_mut(cn);
    const Tensor& c_prev = t.value(c);
    const Tensor& c_new = t.value(cn);
    std::vector<double> dpre(4 * H);
    std::vector<double> dc_prev(H);
    for (std::size_t j = 0; j < H; ++j) {
      const double i = a[j], f = a[H + j], gg = a[2 * H + j], o = a[3 * H + j];
      const double tc = std::tanh(c_new[j]);
      const double dc = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
      dpre[j] = dc * gg * i * (1.0 - i);
      dpre[H + j] = dc * c_prev[j] * f * (1.0 - f);
      dpre[2 * H + j] = dc * i * (1.0 - gg * gg);
      dpre[3 * H + j] = dh[j] * tc * o * (1.0 - o);
      dc_prev[j] = dc * f;
    }
    if (Tensor* db = t.param_grad(bias)) {
      for (std::size_t r = 0; r < 4 * H; ++r) (*db)[r] += dpre[r];
    }
    double* dx = t.requires_grad(x) ? t.grad_mut(x).data() : nullptr;
    double* dhp = t.requires_grad(h) ? t.grad_mut(h).data() : nullptr;
    if (Tensor* dwx = t.param_grad(wx)) {
      kernels::linear_backward(4 * H, D, wx.value.data(), t.value(x).data(), dpre.data(), dwx->data(), dx);
    } else if (dx) {
      kernels::gemv_t(4 * H, D, wx.value.data(), dpre.data(), dx, true);
    }
    if (Tensor* dwh = t.param_grad(wh)) {
      kernels::linear_backward(4 * H, H, wh.value.data(), t.value(h).data(), dpre.data(), dwh->data(), dhp);
    } else if (dhp) {
      kernels::gemv_t(4 * H, H, wh.value.data(), dpre.data(), dhp, true);
    }
    if (t.requires_grad(c)) {
      Tensor& dcp = t.grad_mut(c);
      for (std::size_t j = 0; j < H; ++j) dcp[j] += dc_prev[j];
    }
  });
  return {hn, cn};
}

Var lstm_sequence(Tape& tape, Var xs, Parameter& wx, Parameter& wh, Parameter& bias) {
  const Tensor& xv = tape.value(xs);
  expect(xv.rank() == 2, "lstm_sequence: input must be T x D");
  const std::size_t T = xv.dim(0), D = xv.dim(1);
  expect(wx.value.rank() == 2 && wx.value.dim(1) == D && wx.value.dim(0) % 4 == 0, "lstm_sequence: wx shape");
  const std::size_t H = wx.value.dim(0) / 4;
  expect(wh.value.rank() == 2 && wh.value.dim(0) == 4 * H && wh.value.dim(1) == H, "lstm_sequence: wh shape");
  expect(bias.value.size() == 4 * H, "lstm_sequence: bias length");
  const std::size_t G = 4 * H;

  // Activated gates per step (T x 4H) and cell states (T x H).
  auto acts = std::make_shared<std::vector<double>>(T * G);
  auto cells = std::make_shared<std::vector<double>>(T * H);
  kernels::gemm_nt(T, G, D, xv.data(), D, wx.value.data(), D, acts->data(), G, false);
  Tensor hs({T, H});
  std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double* a = acts->data() + t * G;
    for (std::size_t r = 0; r < G; ++r) a[r] += bias.value[r];
    kernels::gemv(G, H, wh.value.data(), h_prev.data(), a, true);
    double* c_t = cells->data() + t * H;
    double* h_t = hs.data() + t * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(a[j]), f = sigmoid(a[H + j]), g = std::tanh(a[2 * H + j]),
                   o = sigmoid(a[3 * H + j]);
      a[j] = i;
      a[H + j] = f;
      a[2 * H + j] = g;
      a[3 * H + j] = o;
      c_t[j] = f * c_prev[j] + i * g;
      h_t[j] = o * std::tanh(c_t[j]);
    }
    std::copy_n(c_t, H, c_prev.begin());
    std::copy_n(h_t, H, h_prev.begin());
  }

  Var y = tape.add_node(std::move(hs));
  tape.on_backward([=, &wx, &wh, &bias](Tape& tp) {
    const Tensor& dhs = tp.grad_mut(y);
    const Tensor& hv = tp.value(y);
    std::vector<double> dpre(T * G);
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
    for (std::size_t s = T; s-- > 0;) {
      const double* a = acts->data() + s * G;
      const double* c_t = cells->data() + s * H;
      const double* c_p = s > 0 ? cells->data() + (s - 1) * H : nullptr;
      double* d = dpre.data() + s * G;
      for (std::size_t j = 0; j < H; ++j) {
        const double i = a[j], f = a[H + j], g = a[2 * H + j], o = a[3 * H + j];
        const double tc = std::tanh(c_t[j]);
        const double dh = dhs[s * H + j] + dh_next[j];
        const double dc = dc_next[j] + dh * o * (1.0 - tc * tc);
        d[j] = dc * g * i * (1.0 - i);
        d[H + j] = dc * (c_p ? c_p[j] : 0.0) * f * (1.0 - f);
        d[2 * H + j] = dc * i * (1.0 - g * g);
        d[3 * H + j] = dh * tc * o * (1.0 - o);
        dc_next[j] = dc * f;
      }
      if (s > 0) kernels::gemv_t(G, H, wh.value.data(), d, dh_next.data(), false);
    }
    if (Tensor* db = tp.param_grad(bias)) {
      for (std::size_t s = 0; s < T; ++s) {
        for (std::size_t r = 0; r < G; ++r) (*db)[r] += dpre[s * G + r];
      }
    }
    if (Tensor* dwx = tp.param_grad(wx)) {
      kernels::gemm_tn(G, D, T, dpre.data(), G, tp.value(xs).data(), D, dwx->data(), D, true);
    }
    if (Tensor* dwh = tp.param_grad(wh); dwh && T > 1) {
      // h_{t-1} for t = 1..T-1 are rows 0..T-2 of the output.
      kernels::gemm_tn(G, H, T - 1, dpre.data() + G, G, hv.data(), H, dwh->data(), H, true);
    }
    if (tp.requires_grad(xs)) {
      kernels::gemm(T, D, G, dpre.data(), G, wx.value.data(), D, tp.grad_mut(xs).data(), D, true);
    }
  });
  return y;
}

Attention additive_attention(Tape& tape, Var hiddens, Parameter& w, Parameter& v) {
  const Tensor& hv = tape.value(hiddens);
  expect(hv.rank() == 2 && hv.dim(0) >= 1, "additive_attention: hiddens must be T x H with T >= 1");
  const std::size_t T = hv.dim(0), H = hv.dim(1);
  expect(w.value.rank() == 2 && w.value.dim(1) == H, "additive_attention: W shape");
  const std::size_t A = w.value.dim(0);
  expect(v.value.size() == A, "additive_attention: v length");

  auto u = std::make_shared<std::vector<double>>(T * A);
  kernels::gemm_nt(T, A, H, hv.data(), H, w.value.data(), H, u->data(), A, false);
  for (double& z : *u) z = std::tanh(z);
  std::vector<double> score(T);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t a = 0; a < A; ++a) s += (*u)[t * A + a] * v.value[a];
    score[t] = s;
  }
  const double mx = *std::max_element(score.begin(), score.end());
  Tensor weights({T});
  double denom = 0.0;
  for (std::size_t t = 0; t < T; ++t) denom += (weights[t] = std::exp(score[t] - mx));
  for (std::size_t t = 0; t < T; ++t) weights[t] /= denom;
  Tensor context({H});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < H; ++j) context[j] += weights[t] * hv[t * H + j];
  }

  Var ctx = tape.add_node(std::move(context));
  Var wts = tape.add_node(std::move(weights));
  tape.on_backward([=, &w, &v](Tape& tp) {
    const Tensor& hs = tp.value(hiddens);
    const Tensor& wt = tp.value(wts);
    const Tensor& dctx = tp.grad_mut(ctx);
    std::vector<double> dw(T);
    for (std::size_t t = 0; t < T; ++t) {
      double s = tp.grad_mut(wts)[t];
      for (std::size_t j = 0; j < H; ++j) s += dctx[j] * hs[t * H + j];
      dw[t] = s;
    }
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += wt[t] * dw[t];
    std::vector<double> dz(T * A);
    Tensor* dv = tp.param_grad(v);
    for (std::size_t t = 0; t < T; ++t) {
      const double ds = wt[t] * (dw[t] - mean);
      for (std::size_t a = 0; a < A; ++a) {
        const double ua = (*u)[t * A + a];
        if (dv) (*dv)[a] += ds * ua;
        dz[t * A + a] = ds * v.value[a] * (1.0 - ua * ua);
      }
    }
    if (Tensor* dW = tp.param_grad(w)) {
      kernels::gemm_tn(A, H, T, dz.data(), A, hs.data(), H, dW->data(), H, true);
    }
    if (tp.requires_grad(hiddens)) {
      Tensor& dh = tp.grad_mut(hiddens);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < H; ++j) dh[t * H + j] += wt[t] * dctx[j];
      }
      kernels::gemm(T, H, A, dz.data(), A, w.value.data(), H, dh.data(), H, true);
    }
  });
  return {ctx, wts};
}

}  // namespace ops

}  // namespace dqt
