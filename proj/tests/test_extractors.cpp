#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dqt/error.hpp"
#include "dqt/extractors.hpp"

using namespace dqt;

namespace {

CnnConfig small_cnn() {
  CnnConfig c;
  c.conv_channels = {4, 4, 4, 4, 4, 4, 4};
  c.fc_hidden = {16, 12};
  return c;
}

StateImage random_image(std::uint64_t seed) {
  StateImage img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (auto& v : img.cells) v = z(rng);
  img.anchor = 100;
  return img;
}

double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(CnnBranch, DefaultsHaveSevenConvsAndEightOutputs) {
  const CnnConfig def;
  EXPECT_EQ(def.conv_channels, (std::vector<std::size_t>{24, 24, 48, 48, 96, 96, 96}));
  CnnBranch cnn{def};
  ParamSet ps;
  std::mt19937_64 rng(1);
  cnn.add_params(ps, rng);
  EXPECT_EQ(ps.get("cnn.conv0.weight").value.shape(), (Shape{24, 12, 3, 3}));
  EXPECT_EQ(ps.get("cnn.conv6.weight").value.shape(), (Shape{96, 96, 3, 3}));
  EXPECT_EQ(ps.get("cnn.fc0.weight").value.shape(), (Shape{256, 96 * 81}));
  EXPECT_EQ(ps.get("cnn.fc2.weight").value.shape(), (Shape{8, 64}));
  EXPECT_THROW(ps.get("cnn.conv7.weight"), std::exception);
}

TEST(CnnBranch, ConfigValidation) {
  CnnConfig c = small_cnn();
  c.conv_channels.pop_back();
  EXPECT_THROW(CnnBranch{c}, ConfigError);
  c = small_cnn();
  c.kernel = 5;  // padding 1 would shrink the grid
  EXPECT_THROW(CnnBranch{c}, ConfigError);
  c = small_cnn();
  c.dropout = 1.0;
  EXPECT_THROW(CnnBranch{c}, ConfigError);
  LstmConfig l;
  l.hidden = 0;
  EXPECT_THROW(LstmBranch{l}, ConfigError);
  EXPECT_EQ(LstmConfig{}.hidden, 256u);
}

TEST(CnnBranch, ZeroImageZeroBiasGivesZero) {
  CnnBranch cnn{small_cnn()};
  ParamSet ps;
  std::mt19937_64 rng(2);
  cnn.add_params(ps, rng);
  Tape tape;
  const Var y = cnn.forward(tape, ps, tape.constant(Tensor({12, 9, 9})), Mode::Eval, rng);
  ASSERT_EQ(tape.value(y).size(), 8u);
  for (double v : tape.value(y).values()) EXPECT_EQ(v, 0.0);
}

TEST(CnnBranch, EvalModeIsPureAndDifferentiable) {
  CnnBranch cnn{small_cnn()};
  ParamSet ps;
  std::mt19937_64 rng(3);
  cnn.add_params(ps, rng);
  const Tensor img = image_tensor(random_image(4));
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 r(seed);
    Tape tape;
    const Var y = cnn.forward(tape, ps, tape.constant(img), Mode::Eval, r);
    return std::vector<double>(tape.value(y).values().begin(), tape.value(y).values().end());
  };
  const auto a = run(5), b = run(6);
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_TRUE(std::isfinite(v));

  Tape tape(Tape::Options{.record = true, .param_grads = false});
  const Var x = tape.input(img);
  const Var y = cnn.forward(tape, ps, x, Mode::Eval, rng);
  tape.backward(ops::pick(tape, y, 0));
  double norm = 0;
  for (double g : tape.grad(x).values()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(CnnBranch, TrainModeDropoutChangesOutputs) {
  CnnConfig c = small_cnn();
  c.dropout = 0.5;
  CnnBranch cnn{c};
  ParamSet ps;
  std::mt19937_64 rng(7);
  cnn.add_params(ps, rng);
  const Tensor img = image_tensor(random_image(8));
  Tape t1, t2;
  std::mt19937_64 r1(1), r2(2);
  const Var y1 = cnn.forward(t1, ps, t1.constant(img), Mode::Train, r1);
  const Var y2 = cnn.forward(t2, ps, t2.constant(img), Mode::Train, r2);
  EXPECT_NE(std::vector<double>(t1.value(y1).values().begin(), t1.value(y1).values().end()),
            std::vector<double>(t2.value(y2).values().begin(), t2.value(y2).values().end()));
}

TEST(LstmBranch, MatchesStepByStepOracle) {
  LstmConfig cfg;
  cfg.hidden = 6;
  cfg.attention_dim = 5;
  LstmBranch lstm{cfg};
  ParamSet ps;
  std::mt19937_64 rng(9);
  lstm.add_params(ps, rng);
  const std::size_t H = 6, A = 5;
  for (std::size_t i = 0; i < 4 * H; ++i) ps.get("lstm.bias").value[i] += 0.1;
  const StateImage img = random_image(10);
  Tape tape;
  const auto out = lstm.forward(tape, ps, tape.constant(image_tensor(img)));

  const auto seq = to_sequence(img);
  const Tensor &wx = ps.get("lstm.wx").value, &wh = ps.get("lstm.wh").value, &b = ps.get("lstm.bias").value;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  std::vector<std::vector<double>> hs;
  for (std::size_t t = 0; t < 12; ++t) {
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      z[r] = b[r];
      for (std::size_t k = 0; k < 81; ++k) z[r] += wx[r * 81 + k] * seq[t][k];
      for (std::size_t k = 0; k < H; ++k) z[r] += wh[r * H + k] * h[k];
    }
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = sigm(z[H + j]) * c[j] + sigm(z[j]) * std::tanh(z[2 * H + j]);
      h[j] = sigm(z[3 * H + j]) * std::tanh(c[j]);
    }
    hs.push_back(h);
  }
  std::vector<double> score(12);
  for (std::size_t t = 0; t < 12; ++t)
    for (std::size_t a = 0; a < A; ++a) {
      double u = 0;
      for (std::size_t j = 0; j < H; ++j) u += ps.get("attention.w").value[a * H + j] * hs[t][j];
      score[t] += ps.get("attention.v").value[a] * std::tanh(u);
    }
  double denom = 0;
  for (double s : score) denom += std::exp(s);
  std::vector<double> ctx(H, 0.0);
  for (std::size_t t = 0; t < 12; ++t) {
    const double w = std::exp(score[t]) / denom;
    EXPECT_NEAR(tape.value(out.attention)[t], w, 1e-13);
    for (std::size_t j = 0; j < H; ++j) ctx[j] += w * hs[t][j];
  }
  for (std::size_t o = 0; o < 8; ++o) {
    double f = ps.get("lstm.proj.bias").value[o];
    for (std::size_t j = 0; j < H; ++j) f += ps.get("lstm.proj.weight").value[o * H + j] * ctx[j];
    EXPECT_NEAR(tape.value(out.features)[o], f, 1e-13);
  }
  double sum = 0;
  for (double w : tape.value(out.attention).values()) sum += w;
  EXPECT_EQ(tape.value(out.attention).size(), 12u);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(LstmBranch, IdenticalStepsGiveUniformAttention) {
  // With no recurrent weights and a closed forget gate every step maps the same
  // input to the same hidden state, so all scores tie.
  LstmConfig cfg;
  cfg.hidden = 8;
  cfg.attention_dim = 4;
  LstmBranch lstm{cfg};
  ParamSet ps;
  std::mt19937_64 rng(11);
  lstm.add_params(ps, rng);
  ps.get("lstm.wh").value.fill(0.0);
  for (std::size_t j = 0; j < 8; ++j) ps.get("lstm.bias").value[8 + j] = -200.0;
  StateImage img;
  const auto base = random_image(12);
  for (std::size_t c = 0; c < 12; ++c)
    for (std::size_t k = 0; k < 81; ++k) img.cells[c * 81 + k] = base.cells[k];
  Tape tape;
  const auto out = lstm.forward(tape, ps, tape.constant(image_tensor(img)));
  for (double w : tape.value(out.attention).values()) EXPECT_NEAR(w, 1.0 / 12.0, 1e-15);
}

TEST(ComposeState, Layout) {
  const std::array<double, 8> zeros{};
  const auto unit = compose_state(zeros, zeros, 1.0);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(unit[i], 0.0);
  EXPECT_EQ(unit[16], 1.0);
  const std::array<double, 8> a{1, 2, 3, 4, 5, 6, 7, 8}, b{9, 10, 11, 12, 13, 14, 15, 16};
  const auto s = compose_state(a, b, 0.0);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(s[i], a[i]);
    EXPECT_EQ(s[8 + i], b[i]);
  }
  EXPECT_EQ(s.size(), 17u);
  EXPECT_THROW(compose_state(a, b, 0.5), std::invalid_argument);
  const std::array<double, 7> short7{};
  EXPECT_THROW(compose_state(short7, b, 0.0), ShapeError);
}

TEST(ImageTensor, KeepsLayout) {
  const auto img = random_image(13);
  const Tensor t = image_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{12, 9, 9}));
  for (std::size_t i = 0; i < kImageSize; ++i) EXPECT_EQ(t[i], img.cells[i]);
}

TEST(Init, KaimingBoundAndUniformRange) {
  EXPECT_NEAR(kaiming_bound(100, 0.0), std::sqrt(6.0 / 100.0), 1e-15);
  Tensor t({10000});
  std::mt19937_64 rng(14);
  init_uniform(t, 0.3, rng);
  double lo = 1, hi = -1;
  for (double v : t.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -0.3);
  EXPECT_LE(hi, 0.3);
  EXPECT_LT(lo, -0.29);
  EXPECT_GT(hi, 0.29);
}
