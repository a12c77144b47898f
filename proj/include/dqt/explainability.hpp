#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dqt/dqn_agent.hpp"
#include "dqt/market_data.hpp"
#include "dqt/state_builder.hpp"

namespace dqt {

/// |dQ_action / d input| for every cell of the state image.
struct SaliencyMap {
  std::array<double, kImageSize> values{};  // same layout as StateImage::cells
  std::size_t anchor = 0;
  Action action = Action::Hold;

  double at(std::size_t channel, std::size_t row, std::size_t col) const {
    return values[channel * kCells + row * kGridSide + col];
  }
};

/// Eval-mode gradient through both branches; parameters are not touched.
SaliencyMap input_saliency(const QNetwork& network, ParamSet& params, const StateImage& img, double position,
                           Action action);

using AttentionRow = std::array<double, kNumFeatures>;

/// Attention weights of the LSTM branch for each anchor day in [first, last].
std::vector<AttentionRow> attention_trace(const QNetwork& network, ParamSet& params, const FeatureMatrix& fm,
                                          std::size_t first, std::size_t last, const NormalizationSpec& spec);

struct GradNormRecord {
  std::size_t step = 0;
  std::vector<double> component_norms;
  double global_norm = 0.0;  // pre-clip
};

/// Collects one record per training step and raises a vanishing-gradient
/// warning when some component stays below `threshold` for `patience`
/// consecutive steps.
class GradNormTracker {
 public:
  explicit GradNormTracker(std::vector<std::string> components, double threshold = 1e-8, std::size_t patience = 100);

  /// Returns a warning the first time a component's run of small norms reaches `patience`.
  std::optional<std::string> record(std::size_t step, const TrainStepResult& result);

  const std::vector<std::string>& components() const { return components_; }
  const std::vector<GradNormRecord>& records() const { return records_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Drops stored records (warnings and run lengths are kept).
  void clear_records() { records_.clear(); }

 private:
  std::vector<std::string> components_;
  double threshold_;
  std::size_t patience_;
  std::vector<std::size_t> run_;
  std::vector<GradNormRecord> records_;
  std::vector<std::string> warnings_;
};

inline constexpr std::size_t kInputWeightCount = kStateDim;

struct InputWeightSummary {
  std::array<double, kStateDim> values{};
  static std::array<std::string, kStateDim> labels();
};

/// Mean |w| down each input column of the first DQN layer.
InputWeightSummary input_weight_summary(const ParamSet& params);

/// Warns when the mean over the cnn or the lstm inputs drops below `threshold`.
std::optional<std::string> collapse_warning(const InputWeightSummary& summary, double threshold = 1e-6);

void save_saliency_csv(const SaliencyMap& map, const std::filesystem::path& path);
void save_attention_csv(std::span<const AttentionRow> rows, std::span<const std::size_t> days,
                        const PriceSeries& series, const std::filesystem::path& path);
void write_gradnorm_header(std::ostream& out, const std::vector<std::string>& components);
void write_gradnorm_row(std::ostream& out, const GradNormRecord& record);
void save_gradnorms_csv(const GradNormTracker& tracker, const std::filesystem::path& path);
void save_weights_csv(const InputWeightSummary& summary, const std::filesystem::path& path);

}  // namespace dqt
