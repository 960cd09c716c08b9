#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapelab/compaction.hpp"
#include "tapelab/dataset.hpp"
#include "tapelab/models.hpp"
#include "tapelab/error.hpp"

namespace tapelab {

/// Trapezoidal area under uniformly spaced samples (unit step).
template <typename Derived>
typename Derived::Scalar trapezoid(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() < 2) return 0;
  return v.sum() - (v(0) + v(v.size() - 1)) / 2;
}

/// 100 * area(|pred - ref|) / area(ref), trapezoidal rule on both.
template <typename DerivedP, typename DerivedR>
double delta_dic(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedR>& ref) {
  if (pred.size() != ref.size())
    throw InvalidArgument("delta_dic: curves have lengths " + std::to_string(pred.size()) +
                          " and " + std::to_string(ref.size()));
  const double ref_area = trapezoid(ref);
  if (!(ref_area > 0)) throw DegenerateInput("delta_dic: reference curve has zero area");
  return 100.0 * trapezoid((pred - ref).cwiseAbs()) / ref_area;
}

/// Curve overload; also requires both curves to be at the same stage.
double delta_dic(const DicCurve& pred, const DicCurve& ref);

struct AccuracyResult {
  double accuracy = 0.0;
  std::vector<std::pair<int, int>> pairs;  // (predicted, label)
  Eigen::MatrixXi confusion;               // rows: label - 1, columns: predicted - 1
};

/// Fraction of exact matches. `classes` sizes the confusion matrix (0: largest label seen).
AccuracyResult accuracy(std::span<const int> predicted, std::span<const int> labels,
                        int classes = 0);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double cumulative = 0.0;
  double outlier_threshold = 10.0;
  std::vector<std::string> outliers;  // ids above the threshold, in sample order
};

/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::span<const double> values, std::span<const std::string> ids,
                  double outlier_threshold = 10.0);

struct SampleError {
  std::string id;
  int label = 0;
  std::optional<int> predicted;
  double delta_dic = 0.0;            // percent
  std::optional<double> recon_err;   // percent, relative L2 of the reconstruction
  bool class_ok = false;
};

struct ErrorReport {
  std::string split;
  std::vector<SampleError> samples;
  Summary delta;
  std::optional<Summary> recon;
  std::optional<AccuracyResult> classification;
};

/// Per-sample errors of `prediction` against `samples` (same column order). Class and
/// reconstruction fields are filled when the prediction carries them.
ErrorReport make_report(const std::string& split, const SampleSet& samples,
                        const Prediction& prediction, int classes,
                        double outlier_threshold = 10.0);

}  // namespace tapelab
