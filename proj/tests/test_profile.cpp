#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "tapelab/csv.hpp"
#include "tapelab/error.hpp"
#include "tapelab/profile.hpp"

using namespace tapelab;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd sine(Eigen::Index n, double spacing, double wavelength) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = std::sin(2 * std::numbers::pi * static_cast<double>(i) * spacing / wavelength);
  return v;
}

// Amplitude transmission of an untruncated Gaussian low-pass with 50 % at the cutoff.
double gaussian_transmission(double wavelength, double cutoff) {
  const double a = std::sqrt(std::log(2.0) / std::numbers::pi);
  return std::exp(-std::numbers::pi * std::pow(a * cutoff / wavelength, 2));
}

double interior_amplitude(const Eigen::VectorXd& v, Eigen::Index margin) {
  return v.segment(margin, v.size() - 2 * margin).cwiseAbs().maxCoeff();
}

RoughnessProfile noisy(std::uint64_t seed, Eigen::Index n = 300) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  RoughnessProfile p{"p" + std::to_string(seed), Eigen::VectorXd(n), 3.0, 1 + static_cast<int>(seed % 12)};
  for (Eigen::Index i = 0; i < n; ++i) p.heights(i) = z(rng);
  return p;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tapelab_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("profile") {
  TEST_CASE("low-pass transmission matches the Gaussian weighting function") {
    const double spacing = 3.0, cutoff = 800.0;
    const Eigen::Index n = 6000;
    for (const double wavelength : {400.0, 800.0, 1600.0, 4000.0}) {
      const auto out = gaussian_lowpass(sine(n, spacing, wavelength), spacing, cutoff);
      const double expected = gaussian_transmission(wavelength, cutoff);
      CAPTURE(wavelength);
      // Truncating the kernel at +/- cutoff loses under 0.1 % of its mass.
      CHECK(interior_amplitude(out, 600) == doctest::Approx(expected).epsilon(2e-3));
    }
  }

  TEST_CASE("low-pass preserves constants and linear trends") {
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(400, 2.5);
    CHECK(gaussian_lowpass(c, 3.0, 800.0).isApprox(c, 1e-12));
    const Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(2000, 0.0, 10.0);
    const auto out = gaussian_lowpass(ramp, 3.0, 800.0);
    CHECK((out - ramp).segment(300, 1400).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("decomposition sums back to the source") {
    const auto p = noisy(4);
    const auto m = decompose(p);
    CHECK((m.heights + m.macro - p.heights).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.source().heights.isApprox(p.heights));
    CHECK(m.label == p.label);
  }

  TEST_CASE("normalization chain inverts exactly") {
    std::vector<RoughnessProfile> ps;
    for (std::uint64_t s = 0; s < 8; ++s) ps.push_back(noisy(s));
    const auto stats = fit_population_stats(ps);
    CHECK(stats.sigma > 0);
    for (const auto& p : ps) {
      const auto mm = normalize_minmax(p);
      CHECK(mm.values.minCoeff() == 0.0);
      CHECK(mm.values.maxCoeff() == 1.0);
      CHECK((denormalize(mm) - p.heights).cwiseAbs().maxCoeff() < 1e-12);
      const auto st = standardize(mm, stats);
      CHECK(st.stage == NormalizationStage::kStandardized);
      CHECK((unstandardize(st).values - mm.values).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((denormalize(st) - p.heights).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("standardized population has zero mean and spread 1/6") {
    std::vector<RoughnessProfile> ps;
    for (std::uint64_t s = 0; s < 10; ++s) ps.push_back(noisy(s));
    const auto stats = fit_population_stats(ps);
    double sum = 0, sq = 0, n = 0;
    for (const auto& st : standardize_all(ps, stats)) {
      sum += st.values.sum();
      sq += st.values.squaredNorm();
      n += static_cast<double>(st.values.size());
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::sqrt(sq / n) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
  }

  TEST_CASE("invalid profiles are rejected") {
    RoughnessProfile flat{"flat", Eigen::VectorXd::Constant(10, 1.0), 3.0, 1};
    CHECK_THROWS_AS(normalize_minmax(flat), DegenerateInput);
    RoughnessProfile bad{"nan", Eigen::VectorXd::Zero(10), 3.0, 1};
    bad.heights(3) = std::nan("");
    CHECK_THROWS_AS(bad.validate(), InvalidData);
    RoughnessProfile short_one{"s", Eigen::VectorXd::Zero(1), 3.0, 1};
    CHECK_THROWS_AS(short_one.validate(), InvalidData);
  }
}

TEST_SUITE("csv") {
  TEST_CASE("profiles round-trip bit for bit") {
    std::vector<RoughnessProfile> ps;
    for (std::uint64_t s = 0; s < 5; ++s) ps.push_back(noisy(s, 50));
    ps[2].label.reset();
    const auto path = temp_file("profiles.csv");
    save_profiles(ps, path, "# made by a test");
    CHECK(detect_profile_file(path) == ProfileFileKind::kProfiles);
    const auto back = load_profiles(path);
    REQUIRE(back.size() == ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(back[i].id == ps[i].id);
      CHECK(back[i].label == ps[i].label);
      CHECK(back[i].spacing == ps[i].spacing);
      CHECK(back[i].heights == ps[i].heights);
    }
  }

  TEST_CASE("micro files feed the same loader as plain files") {
    std::vector<MicroProfile> ms;
    for (std::uint64_t s = 0; s < 3; ++s) ms.push_back(decompose(noisy(s, 400)));
    const auto path = temp_file("micro.csv");
    save_micro_profiles(ms, path);
    CHECK(detect_profile_file(path) == ProfileFileKind::kMicro);
    const auto micro = load_micro_heights(path, 800.0);
    REQUIRE(micro.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(micro[i].heights == ms[i].heights);
    const auto again = load_micro_profiles(path);
    CHECK(again[1].macro == ms[1].macro);
  }

  TEST_CASE("DIC curves round-trip") {
    std::vector<DicCurve> cs;
    cs.push_back({"a", Eigen::VectorXd::LinSpaced(7, 0.1, 1.0 / 3.0), DicStage::kRaw, 0.1, 1.0 / 3.0});
    cs.push_back({"b", Eigen::VectorXd::Constant(7, 0.5), DicStage::kRaw, 0.1, std::nullopt});
    const auto path = temp_file("dic.csv");
    save_dic(cs, path);
    const auto back = load_dic(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].values == cs[0].values);
    CHECK(back[0].artifact_value == cs[0].artifact_value);
    CHECK(!back[1].artifact_value);
    CHECK(back[1].stage == DicStage::kRaw);
  }

  TEST_CASE("malformed files raise data errors") {
    const auto path = temp_file("broken.csv");
    {
      std::ofstream out(path);
      out << "id,label,spacing_um,h_0,h_1\n" << "x,1,3.0,0.5,abc\n";
    }
    CHECK_THROWS_AS(load_profiles(path), ParseError);
    {
      std::ofstream out(path);
      out << "id,label,spacing_um,h_0,h_1\n" << "x,1,3.0,0.5\n";
    }
    CHECK_THROWS_AS(load_profiles(path), InvalidData);
    CHECK_THROWS_AS(load_profiles(temp_file("does_not_exist.csv")), InvalidData);
  }

  TEST_CASE("shortest round-trip formatting") {
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0})
      CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
  }
}
