#include "dqt/state_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "dqt/error.hpp"

namespace dqt {

namespace {

void zscore(std::span<double> v) {
  double mean = 0.0, max_abs = 0.0;
  for (double x : v) {
    mean += x;
    max_abs = std::max(max_abs, std::abs(x));
  }
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(v.size()));
  // Windows whose spread is pure rounding noise count as constant.
  if (sigma <= 1e-12 * max_abs) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = (x - mean) / sigma;
}

void affine(std::span<double> v, double lo, double hi) {
  for (double& x : v) x = (std::clamp(x, lo, hi) - lo) / (hi - lo);
}

}  // namespace

NormalizationSpec NormalizationSpec::defaults() {
  NormalizationSpec spec;
  const Normalization z{Normalization::Kind::ZScore, 0.0, 1.0};
  spec.per_feature.fill(z);
  spec.per_feature[kRsi] = {Normalization::Kind::Affine, 0.0, 100.0};
  spec.per_feature[kStochK] = {Normalization::Kind::Affine, 0.0, 100.0};
  spec.per_feature[kFibLevel] = {Normalization::Kind::Affine, 0.0, 1.0};
  spec.per_feature[kBollPctB] = {Normalization::Kind::Affine, -1.0, 2.0};
  return spec;
}

std::size_t first_buildable_day(const FeatureMatrix& fm) {
  const std::size_t day = fm.first_valid() + kCells - 1;
  if (day >= fm.days()) {
    throw DataError("no buildable state: need " + std::to_string(kCells) + " valid days, have " +
                    std::to_string(fm.days() > fm.first_valid() ? fm.days() - fm.first_valid() : 0));
  }
  return day;
}

StateImage raw_window(const FeatureMatrix& fm, std::size_t day) {
  if (day >= fm.days()) throw DataError("state anchor " + std::to_string(day) + " past end of data");
  if (day + 1 < kCells || day + 1 - kCells < fm.first_valid()) {
    throw DataError("insufficient history for day " + std::to_string(day) + "; earliest buildable day is " +
                    std::to_string(fm.first_valid() + kCells - 1));
  }
  StateImage img;
  img.anchor = day;
  const std::size_t first = day + 1 - kCells;
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t k = 0; k < kCells; ++k) img.cells[c * kCells + k] = fm.at(first + k, c);
  }
  return img;
}

StateImage build_state(const FeatureMatrix& fm, std::size_t day, const NormalizationSpec& spec) {
  StateImage img = raw_window(fm, day);
  for (std::size_t c = 0; c < kChannels; ++c) {
    std::span<double> channel(img.cells.data() + c * kCells, kCells);
    const auto& n = spec.per_feature[c];
    if (n.kind == Normalization::Kind::ZScore) {
      zscore(channel);
    } else {
      affine(channel, n.lo, n.hi);
    }
  }
  return img;
}

Sequence to_sequence(const StateImage& img) {
  Sequence seq;
  for (std::size_t t = 0; t < kChannels; ++t) {
    std::copy_n(img.cells.begin() + t * kCells, kCells, seq[t].begin());
  }
  return seq;
}

StateImage from_sequence(const Sequence& seq, std::size_t anchor) {
  StateImage img;
  img.anchor = anchor;
  for (std::size_t t = 0; t < kChannels; ++t) std::copy(seq[t].begin(), seq[t].end(), img.cells.begin() + t * kCells);
  return img;
}

void save_state_csv(const StateImage& img, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t c = 0; c < kChannels; ++c) {
    out << "# channel " << c << ' ' << kFeatureNames[c] << " anchor " << img.anchor << '\n';
    for (std::size_t r = 0; r < kGridSide; ++r) {
      for (std::size_t col = 0; col < kGridSide; ++col) out << (col ? "," : "") << img.at(c, r, col);
      out << '\n';
    }
  }
}

}  // namespace dqt
