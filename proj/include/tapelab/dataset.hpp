#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tapelab/compaction.hpp"
#include "tapelab/profile.hpp"

namespace tapelab {

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded per-class split: round(test_fraction * class size) samples of each class go to
/// the test set, at least one when the class has two or more samples and the fraction is
/// positive. Labels are grouped by value; the result does not depend on input order
/// within a class beyond the seed.
Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

/// Column-per-sample matrices fed to the networks.
struct SampleSet {
  std::vector<std::string> ids;
  std::vector<int> labels;  // 1-based
  Eigen::MatrixXd inputs;   // standardized micro-profiles, N x n
  Eigen::MatrixXd dic;      // DIC targets, M x n (empty when no curves were given)

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
};

/// Pairs each profile with the curve of the same id. Throws InvalidData when a curve is
/// missing or lengths disagree.
std::vector<DicCurve> match_curves(std::span<const RoughnessProfile> profiles,
                                   std::span<const DicCurve> curves);

/// Standardizes `profiles` with `stats` and stacks them (and the matched curves, if any).
SampleSet make_samples(std::span<const RoughnessProfile> profiles,
                       std::span<const DicCurve> matched_curves, const PopulationStats& stats);

struct PreparedData {
  PopulationStats stats;  // fitted on the training split
  SampleSet train;
  SampleSet test;
};

/// Splits, fits population statistics on the training part, and stacks both parts.
/// Every profile must carry a label in 1..classes.
PreparedData prepare(std::span<const RoughnessProfile> profiles,
                     std::span<const DicCurve> curves, const Split& split, int classes);

/// One-hot class matrix (classes x n) for 1-based labels.
Eigen::MatrixXd one_hot(std::span<const int> labels, int classes);

}  // namespace tapelab
