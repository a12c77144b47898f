#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dqt/error.hpp"
#include "dqt/explainability.hpp"

using namespace dqt;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_net() {
  NetworkConfig n;
  n.cnn.conv_channels = {4, 4, 4, 4, 4, 4, 4};
  n.cnn.fc_hidden = {16, 8};
  n.lstm.hidden = 8;
  n.lstm.attention_dim = 4;
  n.dqn.hidden = {8, 8, 8, 8, 8, 8};
  return n;
}

StateImage random_image(std::uint64_t seed) {
  StateImage img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (auto& v : img.cells) v = z(rng);
  return img;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TrainStepResult norms(std::vector<double> v) {
  TrainStepResult r;
  double ss = 0;
  for (double x : v) ss += x * x;
  r.component_norms = std::move(v);
  r.global_norm = std::sqrt(ss);
  return r;
}

}  // namespace

TEST(Saliency, MatchesCentralDifferences) {
  QNetwork net{small_net()};
  ParamSet ps = net.make_params(1);
  const auto before = ps.checksum();
  StateImage img = random_image(2);
  for (Action a : {Action::Hold, Action::Sell, Action::Buy}) {
    const auto map = input_saliency(net, ps, img, 1.0, a);
    EXPECT_EQ(map.action, a);
    std::mt19937_64 rng(static_cast<int>(a) + 10);
    std::uniform_int_distribution<std::size_t> cell(0, kImageSize - 1);
    for (int k = 0; k < 15; ++k) {
      const std::size_t i = cell(rng);
      const double h = 1e-5, keep = img.cells[i];
      img.cells[i] = keep + h;
      const double up = net.q_values(ps, img, 1.0)[static_cast<std::size_t>(a)];
      img.cells[i] = keep - h;
      const double dn = net.q_values(ps, img, 1.0)[static_cast<std::size_t>(a)];
      img.cells[i] = keep;
      const double fd = std::abs((up - dn) / (2 * h));
      EXPECT_NEAR(map.values[i], fd, 1e-6 * std::max(1.0, fd)) << "cell " << i;
    }
    for (double v : map.values) EXPECT_GE(v, 0.0);
    EXPECT_EQ(map.at(3, 4, 5), map.values[3 * 81 + 4 * 9 + 5]);
  }
  EXPECT_EQ(ps.checksum(), before);
}

TEST(AttentionTrace, RowsAreDistributionsAndMatchTheNetwork) {
  const auto s = synthesize(SynthKind::RandomWalk, 300, 0.02, 3);
  const auto fm = build_feature_matrix(s, IndicatorParams{});
  QNetwork net{small_net()};
  ParamSet ps = net.make_params(4);
  const auto spec = NormalizationSpec::defaults();
  const auto rows = attention_trace(net, ps, fm, 160, 299, spec);
  ASSERT_EQ(rows.size(), 140u);
  for (const auto& r : rows) {
    double sum = 0;
    for (double w : r) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  Tape tape;
  std::mt19937_64 unused;
  const auto out = net.forward(tape, ps, build_state(fm, 200, spec), 0.0, Mode::Eval, unused);
  for (std::size_t f = 0; f < kNumFeatures; ++f) EXPECT_EQ(rows[40][f], tape.value(out.attention)[f]);
  EXPECT_THROW(attention_trace(net, ps, fm, 200, 199, spec), std::invalid_argument);
}

TEST(GradNormTracker, WarnsOnceAfterPatience) {
  GradNormTracker t({"a", "b"}, 1e-8, 3);
  EXPECT_FALSE(t.record(0, norms({1.0, 1e-9})));
  EXPECT_FALSE(t.record(1, norms({1.0, 1e-9})));
  EXPECT_FALSE(t.record(2, norms({1.0, 1e-3})));  // run broken
  EXPECT_FALSE(t.record(3, norms({1.0, 0.0})));
  EXPECT_FALSE(t.record(4, norms({1.0, 0.0})));
  const auto w = t.record(5, norms({1.0, 0.0}));
  ASSERT_TRUE(w);
  EXPECT_NE(w->find("b"), std::string::npos);
  EXPECT_NE(w->find("step 5"), std::string::npos);
  EXPECT_FALSE(t.record(6, norms({1.0, 0.0})));
  EXPECT_EQ(t.warnings().size(), 1u);
  EXPECT_EQ(t.records().size(), 7u);
  t.clear_records();
  EXPECT_TRUE(t.records().empty());
  EXPECT_EQ(t.warnings().size(), 1u);
  EXPECT_THROW(t.record(7, norms({1.0})), ShapeError);
  EXPECT_THROW(GradNormTracker({"a"}, 1e-8, 0), std::invalid_argument);
}

// Component norms partition the global norm and every branch receives gradient.
TEST(GradNormTracker, ComponentsPartitionTheGlobalNorm) {
  DqnAgent agent(small_net(), AgentConfig{}, OptimizerConfig{}, 5);
  GradNormTracker tracker(agent.components());
  EXPECT_EQ(agent.components().size(), 19u);
  for (int i = 0; i < 5; ++i) {
    Transition tr{random_image(20 + i), 0.0, Action::Buy, 0.3, random_image(40 + i), 1.0, false};
    const auto r = agent.train_step(tr, 1e-3);
    EXPECT_FALSE(tracker.record(static_cast<std::size_t>(i), r));
    double ss = 0;
    for (double n : r.component_norms) {
      EXPECT_GT(n, 0.0);
      ss += n * n;
    }
    EXPECT_NEAR(std::sqrt(ss), r.global_norm, 1e-12 * r.global_norm);
    EXPECT_LE(r.clipped_norm, 1.0 + 1e-12);
  }
  const auto path = fs::temp_directory_path() / "dqt_gradnorms.csv";
  save_gradnorms_csv(tracker, path);
  const auto lines = read_lines(path);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0].substr(0, 16), "step,cnn.conv0,c");
  EXPECT_EQ(lines[0].substr(lines[0].size() - 7), ",global");
  EXPECT_EQ(std::count(lines[3].begin(), lines[3].end(), ','), 20);
  fs::remove(path);
}

TEST(InputWeights, MeanAbsoluteColumnOracle) {
  QNetwork net{small_net()};
  ParamSet ps = net.make_params(6);
  const Tensor& w = ps.get("dqn.fc0.weight").value;
  const auto s = input_weight_summary(ps);
  for (std::size_t c = 0; c < kStateDim; ++c) {
    double sum = 0;
    for (std::size_t r = 0; r < 8; ++r) sum += std::abs(w[r * kStateDim + c]);
    EXPECT_NEAR(s.values[c], sum / 8, 1e-15);
  }
  const auto labels = InputWeightSummary::labels();
  EXPECT_EQ(labels[0], "cnn_0");
  EXPECT_EQ(labels[8], "lstm_0");
  EXPECT_EQ(labels[16], "position");
  EXPECT_FALSE(collapse_warning(s));

  Tensor& wm = ps.get("dqn.fc0.weight").value;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 8; c < 16; ++c) wm[r * kStateDim + c] = 1e-9;
  const auto lstm_gone = collapse_warning(input_weight_summary(ps));
  ASSERT_TRUE(lstm_gone);
  EXPECT_NE(lstm_gone->find("lstm"), std::string::npos);
  EXPECT_EQ(lstm_gone->find("cnn"), std::string::npos);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) wm[r * kStateDim + c] = 0.0;
  const auto both = collapse_warning(input_weight_summary(ps));
  ASSERT_TRUE(both);
  EXPECT_NE(both->find("cnn and lstm"), std::string::npos);
}

TEST(ExplainCsv, Formats) {
  const auto dir = fs::temp_directory_path() / "dqt_explain_csv";
  fs::remove_all(dir);
  fs::create_directories(dir);
  QNetwork net{small_net()};
  ParamSet ps = net.make_params(7);

  const auto map = input_saliency(net, ps, random_image(8), 0.0, Action::Buy);
  save_saliency_csv(map, dir / "sal.csv");
  const auto sal = read_lines(dir / "sal.csv");
  ASSERT_EQ(sal.size(), 1u + kImageSize);
  EXPECT_EQ(sal[0], "channel,row,col,value");
  EXPECT_EQ(sal[1].substr(0, 6), "0,0,0,");
  EXPECT_EQ(sal.back().substr(0, 7), "11,8,8,");

  const auto s = synthesize(SynthKind::Uptrend, 5, 0.01, 0);
  const std::vector<AttentionRow> rows(2, AttentionRow{});
  const std::vector<std::size_t> days{3, 4};
  save_attention_csv(rows, days, s, dir / "att.csv");
  const auto att = read_lines(dir / "att.csv");
  ASSERT_EQ(att.size(), 3u);
  EXPECT_EQ(att[0].substr(0, 9), "day,date,");
  EXPECT_EQ(std::count(att[0].begin(), att[0].end(), ','), 13);
  EXPECT_EQ(att[1].substr(0, 13), "3,2000-01-06,");
  EXPECT_THROW(save_attention_csv(rows, std::vector<std::size_t>{1}, s, dir / "x.csv"), std::invalid_argument);

  save_weights_csv(input_weight_summary(ps), dir / "w.csv");
  const auto w = read_lines(dir / "w.csv");
  ASSERT_EQ(w.size(), 18u);
  EXPECT_EQ(w[0], "input_name,value");
  EXPECT_EQ(w[17].substr(0, 9), "position,");
  fs::remove_all(dir);
}
