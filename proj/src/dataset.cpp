#include "tapelab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_map>

namespace tapelab {

Split stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw InvalidArgument("split: test fraction must be in [0, 1)");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  Split split;
  for (auto& [label, members] : groups) {
    // Fisher-Yates with an explicit draw so the permutation is library independent.
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(members[i - 1], members[j]);
    }
    auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    if (test_fraction > 0 && members.size() >= 2) n_test = std::max<std::size_t>(n_test, 1);
    n_test = std::min(n_test, members.size() - 1);
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<long>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<long>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<DicCurve> match_curves(std::span<const RoughnessProfile> profiles,
                                   std::span<const DicCurve> curves) {
  std::unordered_map<std::string, const DicCurve*> by_id;
  for (const auto& c : curves) by_id.emplace(c.id, &c);
  std::vector<DicCurve> out;
  out.reserve(profiles.size());
  Eigen::Index length = -1;
  for (const auto& p : profiles) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw InvalidData("missing DIC target for profile '" + p.id + "'");
    if (length >= 0 && it->second->values.size() != length)
      throw InvalidData("DIC curves differ in length");
    length = it->second->values.size();
    out.push_back(*it->second);
  }
  return out;
}

SampleSet make_samples(std::span<const RoughnessProfile> profiles,
                       std::span<const DicCurve> matched_curves, const PopulationStats& stats) {
  SampleSet set;
  if (profiles.empty()) return set;
  if (!matched_curves.empty() && matched_curves.size() != profiles.size())
    throw InvalidArgument("make_samples: curve count does not match profile count");
  const Eigen::Index n = profiles.front().size();
  const auto count = static_cast<Eigen::Index>(profiles.size());
  set.inputs.resize(n, count);
  if (!matched_curves.empty()) set.dic.resize(matched_curves.front().values.size(), count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const auto& p = profiles[static_cast<std::size_t>(j)];
    if (p.size() != n)
      throw InvalidData("profile '" + p.id + "' has " + std::to_string(p.size()) +
                        " points, expected " + std::to_string(n));
    set.ids.push_back(p.id);
    set.labels.push_back(p.label.value_or(0));
    set.inputs.col(j) = standardize(normalize_minmax(p), stats).values;
    if (!matched_curves.empty()) set.dic.col(j) = matched_curves[static_cast<std::size_t>(j)].values;
  }
  return set;
}

PreparedData prepare(std::span<const RoughnessProfile> profiles,
                     std::span<const DicCurve> curves, const Split& split, int classes) {
  for (const auto& p : profiles) {
    if (!p.label) throw InvalidData("profile '" + p.id + "' has no class label");
    if (*p.label < 1 || *p.label > classes)
      throw InvalidData("profile '" + p.id + "' has label " + std::to_string(*p.label) +
                        " outside 1.." + std::to_string(classes));
  }
  const auto matched = curves.empty() ? std::vector<DicCurve>{} : match_curves(profiles, curves);

  auto pick = [&](const std::vector<std::size_t>& idx, auto& profiles_out, auto& curves_out) {
    for (std::size_t i : idx) {
      profiles_out.push_back(profiles[i]);
      if (!matched.empty()) curves_out.push_back(matched[i]);
    }
  };
  std::vector<RoughnessProfile> train_p, test_p;
  std::vector<DicCurve> train_c, test_c;
  pick(split.train, train_p, train_c);
  pick(split.test, test_p, test_c);
  if (train_p.empty()) throw InvalidArgument("prepare: empty training split");

  PreparedData out;
  out.stats = fit_population_stats(train_p);
  out.train = make_samples(train_p, train_c, out.stats);
  out.test = make_samples(test_p, test_c, out.stats);
  return out;
}

Eigen::MatrixXd one_hot(std::span<const int> labels, int classes) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 1 || labels[j] > classes)
      throw InvalidData("label " + std::to_string(labels[j]) + " outside 1.." +
                        std::to_string(classes));
    out(labels[j] - 1, static_cast<Eigen::Index>(j)) = 1.0;
  }
  return out;
}

}  // namespace tapelab
