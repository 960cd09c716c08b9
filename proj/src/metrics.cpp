#include "tapelab/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tapelab {
namespace {

double quantile(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double delta_dic(const DicCurve& pred, const DicCurve& ref) {
  if (pred.stage != ref.stage)
    throw InvalidArgument("delta_dic: curves are at different stages (" + to_string(pred.stage) +
                          " vs " + to_string(ref.stage) + ")");
  return delta_dic(pred.values, ref.values);
}

AccuracyResult accuracy(std::span<const int> predicted, std::span<const int> labels, int classes) {
  if (predicted.size() != labels.size())
    throw InvalidArgument("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw InvalidArgument("accuracy: empty input");
  if (classes <= 0) {
    classes = std::max(*std::max_element(labels.begin(), labels.end()),
                       *std::max_element(predicted.begin(), predicted.end()));
  }
  AccuracyResult r;
  r.confusion = Eigen::MatrixXi::Zero(classes, classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    r.pairs.emplace_back(predicted[i], labels[i]);
    hits += predicted[i] == labels[i];
    if (labels[i] >= 1 && labels[i] <= classes && predicted[i] >= 1 && predicted[i] <= classes)
      ++r.confusion(labels[i] - 1, predicted[i] - 1);
  }
  r.accuracy = static_cast<double>(hits) / static_cast<double>(labels.size());
  return r;
}

Summary summarize(std::span<const double> values, std::span<const std::string> ids,
                  double outlier_threshold) {
  if (values.size() != ids.size()) throw InvalidArgument("summarize: ids and values differ in length");
  Summary s;
  s.count = values.size();
  s.outlier_threshold = outlier_threshold;
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.cumulative += values[i];
    if (values[i] > outlier_threshold) s.outliers.push_back(ids[i]);
  }
  s.mean = s.cumulative / static_cast<double>(values.size());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile(sorted, 0.25);
  s.median = quantile(sorted, 0.5);
  s.q3 = quantile(sorted, 0.75);
  return s;
}

ErrorReport make_report(const std::string& split, const SampleSet& samples,
                        const Prediction& prediction, int classes, double outlier_threshold) {
  const Eigen::Index n = samples.size();
  if (samples.dic.cols() != n) throw InvalidData("report: missing DIC target for a sample");
  if (prediction.dic.cols() != n || prediction.dic.rows() != samples.dic.rows())
    throw InvalidArgument("report: prediction does not match the samples");
  const bool has_classes = !prediction.classes.empty();
  const bool has_recon = prediction.reconstruction.size() > 0;

  ErrorReport r;
  r.split = split;
  std::vector<double> deltas, recons;
  for (Eigen::Index j = 0; j < n; ++j) {
    SampleError e;
    e.id = samples.ids[static_cast<std::size_t>(j)];
    e.label = samples.labels[static_cast<std::size_t>(j)];
    try {
      e.delta_dic = delta_dic(prediction.dic.col(j), samples.dic.col(j));
    } catch (const DegenerateInput&) {
      throw DegenerateInput("report: DIC target of '" + e.id + "' has zero area");
    }
    deltas.push_back(e.delta_dic);
    if (has_classes) {
      e.predicted = prediction.classes[static_cast<std::size_t>(j)];
      e.class_ok = *e.predicted == e.label;
    }
    if (has_recon) {
      const double norm = samples.inputs.col(j).norm();
      e.recon_err = norm > 0 ? 100.0 * (prediction.reconstruction.col(j) - samples.inputs.col(j)).norm() / norm
                             : 0.0;
      recons.push_back(*e.recon_err);
    }
    r.samples.push_back(std::move(e));
  }
  r.delta = summarize(deltas, samples.ids, outlier_threshold);
  if (has_recon) r.recon = summarize(recons, samples.ids, outlier_threshold);
  if (has_classes && n > 0) r.classification = accuracy(prediction.classes, samples.labels, classes);
  return r;
}

}  // namespace tapelab
