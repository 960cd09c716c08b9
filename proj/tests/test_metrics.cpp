#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tapelab/dataset.hpp"
#include "tapelab/error.hpp"
#include "tapelab/metrics.hpp"
#include "tapelab/synth.hpp"

using namespace tapelab;

TEST_SUITE("metrics") {
  TEST_CASE("delta_DIC on hand-computed curves") {
    Eigen::VectorXd ref(3), pred(3);
    ref << 0.5, 1.0, 1.0;
    pred << 0.5, 0.5, 1.0;
    // Areas by the trapezoidal rule: ref 1.75, |diff| 0.5.
    CHECK(delta_dic(pred, ref) == doctest::Approx(100.0 * 0.5 / 1.75));
    CHECK(delta_dic(ref, ref) == 0.0);
    CHECK_THROWS_AS(delta_dic(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)), DegenerateInput);
    CHECK_THROWS_AS(delta_dic(Eigen::VectorXd::Zero(2), ref), InvalidArgument);
    DicCurve a{"a", ref, DicStage::kSmoothed, 0.1, std::nullopt};
    DicCurve b{"b", pred, DicStage::kCorrected, 0.1, std::nullopt};
    CHECK_THROWS_AS(delta_dic(a, b), InvalidArgument);
  }

  TEST_CASE("accuracy and confusion matrix") {
    const std::vector<int> pred{1, 2, 2, 3}, labels{1, 2, 3, 3};
    const auto r = accuracy(pred, labels, 3);
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.confusion(2, 1) == 1);
    CHECK(r.confusion(2, 2) == 1);
    CHECK(r.confusion.sum() == 4);
    CHECK(r.pairs.size() == 4);
  }

  TEST_CASE("summary statistics") {
    const std::vector<double> v{4, 1, 12, 3, 2};
    const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    const auto s = summarize(v, ids, 10.0);
    CHECK(s.count == 5);
    CHECK(s.mean == doctest::Approx(4.4));
    CHECK(s.median == 3.0);
    CHECK(s.q1 == 2.0);
    CHECK(s.q3 == 4.0);
    CHECK(s.min == 1.0);
    CHECK(s.max == 12.0);
    CHECK(s.cumulative == doctest::Approx(22.0));
    CHECK(s.outliers == std::vector<std::string>{"c"});
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("stratified split is seeded, disjoint and per-class") {
    std::vector<int> labels;
    for (int c = 1; c <= 4; ++c)
      for (int i = 0; i < 10; ++i) labels.push_back(c);
    const auto a = stratified_split(labels, 0.2, 9);
    const auto b = stratified_split(labels, 0.2, 9);
    const auto c = stratified_split(labels, 0.2, 10);
    CHECK(a.test == b.test);
    CHECK(a.test != c.test);
    CHECK(a.test.size() == 8);
    CHECK(a.train.size() + a.test.size() == labels.size());
    std::map<int, int> per_class;
    for (auto i : a.test) ++per_class[labels[i]];
    for (const auto& [cls, n] : per_class) CHECK(n == 2);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    for (auto i : a.test) CHECK(all.insert(i).second);
    CHECK(std::is_sorted(a.test.begin(), a.test.end()));
  }

  TEST_CASE("one-hot encoding") {
    const std::vector<int> labels{2, 1, 3};
    const auto m = one_hot(labels, 3);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(0, 1) == 1.0);
    CHECK(m.colwise().sum().isOnes());
    const std::vector<int> bad{4};
    CHECK_THROWS(one_hot(bad, 3));
  }

  TEST_CASE("curves are matched by id") {
    std::vector<RoughnessProfile> ps{{"x", Eigen::VectorXd::Zero(4), 1.0, 1}, {"y", Eigen::VectorXd::Zero(4), 1.0, 2}};
    std::vector<DicCurve> cs{{"y", Eigen::VectorXd::Constant(3, 0.2), DicStage::kSmoothed, 0.1, std::nullopt},
                             {"x", Eigen::VectorXd::Constant(3, 0.1), DicStage::kSmoothed, 0.1, std::nullopt}};
    const auto m = match_curves(ps, cs);
    CHECK(m[0].id == "x");
    CHECK(m[1].values(0) == 0.2);
    cs.pop_back();
    CHECK_THROWS_AS(match_curves(ps, cs), InvalidData);
  }
}

TEST_SUITE("synth") {
  TEST_CASE("a fixed seed gives a bit-identical dataset") {
    GenerateOptions o;
    o.per_class = 3;
    o.points = 200;
    o.seed = 4;
    const auto recipes = default_recipes();
    const auto a = generate(recipes, o);
    const auto b = generate(recipes, o);
    REQUIRE(a.profiles.size() == 36);
    for (std::size_t i = 0; i < a.profiles.size(); ++i) {
      CHECK(a.profiles[i].heights == b.profiles[i].heights);
      CHECK(a.profiles[i].id == b.profiles[i].id);
    }
    o.jobs = 3;
    const auto c = generate(recipes, o);
    for (std::size_t i = 0; i < a.profiles.size(); ++i) CHECK(a.profiles[i].heights == c.profiles[i].heights);
    o.seed = 5;
    CHECK(generate(recipes, o).profiles[0].heights != a.profiles[0].heights);
  }

  TEST_CASE("default recipes at desk scale") {
    const auto recipes = default_recipes();
    CHECK(recipes.size() == 12);
    validate_recipes(recipes);
    GenerateOptions o;
    o.seed = 7;
    const auto ds = generate(recipes, o);
    CHECK(ds.profiles.size() == 360);
    // Population micro spread near 1.3 um, heights inside +/- 35 um (each within 20 %).
    CHECK(ds.stats.micro_sigma == doctest::Approx(1.3).epsilon(0.2));
    double lo = 0, hi = 0;
    for (const auto& p : ds.profiles) {
      CHECK(p.heights.allFinite());
      lo = std::min(lo, p.heights.minCoeff());
      hi = std::max(hi, p.heights.maxCoeff());
      const auto m = decompose(p);
      const double rms = std::sqrt(m.heights.squaredNorm() / static_cast<double>(m.heights.size()));
      CHECK(std::abs(m.heights.mean()) <= 0.1 * rms);
    }
    CHECK(hi <= 35.0 * 1.2);
    CHECK(lo >= -35.0 * 1.2);
    CHECK(ds.stats.centroid_accuracy < 1.0);
  }

  TEST_CASE("recipe validation") {
    auto recipes = default_recipes();
    recipes[0].micro.rms_um = 0;
    recipes[0].macro.clear();
    CHECK_THROWS_AS(recipes[0].validate(), InvalidArgument);
    auto twins = default_recipes();
    twins[1] = twins[0];
    twins[1].class_id = 2;
    CHECK_THROWS_AS(validate_recipes(twins), InvalidArgument);
  }
}
