#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "tapelab/error.hpp"
#include "tapelab/loss.hpp"
#include "tapelab/optimizer.hpp"
#include "tapelab/training.hpp"
#include "tiny_models.hpp"

using namespace tapelab;
using tapelab::testing::numeric_gradient;
using tapelab::testing::relative_error;
using tapelab::testing::tiny_arch;
using tapelab::testing::tiny_samples;

namespace {

// Checks every network's gradient of `objective` against central differences. Biases
// start at zero, which can leave a ReLU exactly on its kink; a small jitter moves every
// parameter to a generic point first.
template <typename Model, typename F>
void check_objective(Model& model, F objective) {
  auto nets = networks(model);
  std::mt19937_64 rng(nets.size());
  std::normal_distribution<double> z(0.0, 0.05);
  for (auto* net : nets)
    for (Eigen::Index i = 0; i < net->parameter_count(); ++i) net->parameters()(i) += z(rng);
  const Objective obj = objective();
  REQUIRE(nets.size() == obj.gradients.size());
  for (std::size_t i = 0; i < nets.size(); ++i) {
    CAPTURE(i);
    REQUIRE(nets[i]->parameter_count() <= 1000);
    const Eigen::VectorXd fd =
        numeric_gradient([&] { return objective().loss.total; }, nets[i]->parameters());
    CHECK(relative_error(obj.gradients[i], fd) <= 1e-4);
  }
}

ExtendedModel tiny_extended(const ArchitectureConfig& a, const SampleSet& s) {
  ExtendedModel m = make_extended(a, 2, 2, ClassTarget::kOneHot, 21);
  m.m2.basis = truncate(m.m2.encoder.forward(s.dic), 2).basis;
  return m;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("relative L2 loss and its gradient") {
    Eigen::MatrixXd p(2, 2), t(2, 2);
    p << 1, 0, 0, 2;
    t << 1, 3, 1, 4;
    Eigen::MatrixXd g;
    CHECK(relative_l2(p, t, &g) == doctest::Approx(1.0 / std::sqrt(2.0) + std::sqrt(13.0) / 5.0));
    CHECK(g.col(0).isApprox(Eigen::Vector2d(0, -1) / std::sqrt(2.0)));
    Eigen::Map<Eigen::VectorXd> ps(p.data(), 4);
    const auto fd = numeric_gradient([&] { return relative_l2(p, t); }, ps);
    CHECK(relative_error(Eigen::Map<Eigen::VectorXd>(g.data(), 4), fd) <= 1e-6);
    CHECK(relative_l2(t, t, &g) == 0.0);
    CHECK(g.isZero());
    CHECK_THROWS_AS(relative_l2(p, Eigen::MatrixXd::Zero(2, 2)), DegenerateInput);
  }

  TEST_CASE("RRAE gradients for each loss term with U held fixed") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 6, 1);
    for (const auto target : {ClassTarget::kOneHot, ClassTarget::kIndex}) {
      RraeModel m = make_rrae(a, 2, target, false, 5);
      const Targets t = make_targets(s, target, a.classes);
      for (const LossWeights w : {LossWeights{1, 0, 0}, LossWeights{0, 1, 0}, LossWeights{0, 0, 1},
                                  LossWeights{0.5, 2, 1.5}}) {
        const auto basis = truncate(encode(m, t.inputs), m.k_max).basis;
        check_objective(m, [&] { return rrae_objective(m, t, w, &basis); });
      }
    }
  }

  TEST_CASE("the batch basis is a stop-gradient") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 6, 2);
    RraeModel m = make_rrae(a, 2, ClassTarget::kOneHot, false, 6);
    const Targets t = make_targets(s, ClassTarget::kOneHot, a.classes);
    const auto own = truncate(encode(m, t.inputs), m.k_max).basis;
    const Objective live = rrae_objective(m, t, LossWeights{});
    const Objective frozen = rrae_objective(m, t, LossWeights{}, &own);
    CHECK(live.loss.total == frozen.loss.total);
    for (std::size_t i = 0; i < live.gradients.size(); ++i)
      CHECK((live.gradients[i] - frozen.gradients[i]).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("classical autoencoder gradients") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 6, 3);
    RraeModel m = make_rrae(a, 2, ClassTarget::kOneHot, true, 7);
    REQUIRE(m.bottleneck);
    const Targets t = make_targets(s, ClassTarget::kOneHot, a.classes);
    for (const LossWeights w : {LossWeights{1, 0, 0}, LossWeights{0, 1, 0}, LossWeights{0, 0, 1}})
      check_objective(m, [&] { return rrae_objective(m, t, w); });
  }

  TEST_CASE("DIC autoencoder gradients") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 6, 4);
    DicAutoencoder m = make_dic_autoencoder(a, 2, 8);
    const auto basis = truncate(m.encoder.forward(s.dic), 2).basis;
    check_objective(m, [&] { return dic_autoencoder_objective(m, s.dic, &basis); });
  }

  TEST_CASE("extended model gradients for each loss term") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 6, 5);
    ExtendedModel m = tiny_extended(a, s);
    const Targets t = make_targets(s, ClassTarget::kOneHot, a.classes);
    for (const ExtendedWeights w :
         {ExtendedWeights{1, 0, 0, 0}, ExtendedWeights{0, 1, 0, 0}, ExtendedWeights{0, 0, 1, 0},
          ExtendedWeights{0, 0, 0, 1}, ExtendedWeights{}}) {
      const auto basis = truncate(m.m1.encoder.forward(t.inputs), 2).basis;
      check_objective(m, [&] { return extended_objective(m, t, w, &basis); });
    }
    ExtendedModel unfixed = make_extended(a, 2, 2, ClassTarget::kOneHot, 21);
    CHECK_THROWS_AS(extended_objective(unfixed, t, ExtendedWeights{}), InvalidArgument);
  }

  TEST_CASE("encoder-decoder gradients, with and without dropout") {
    auto a = tiny_arch();
    a.input_length = 120;
    auto s = tiny_samples(a, 5, 6);
    EncDecModel m = make_encdec(a, 9);
    const Targets t = make_targets(s, ClassTarget::kOneHot, a.classes);
    check_objective(m, [&] { return encdec_objective(m, t, false, 0); });
    check_objective(m, [&] { return encdec_objective(m, t, true, 77); });
  }

  TEST_CASE("optimizer schedule and updates") {
    OptimizerConfig c;
    c.learning_rate = 1e-2;
    c.decay_every = 10;
    c.decay = 0.5;
    CHECK(c.rate(0) == 1e-2);
    CHECK(c.rate(9) == 1e-2);
    CHECK(c.rate(10) == doctest::Approx(5e-3));
    CHECK(c.rate(25) == doctest::Approx(2.5e-3));
    // Each optimizer reduces a convex quadratic.
    for (const auto kind : {OptimizerKind::kGradientDescent, OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
      c.kind = kind;
      c.decay_every = 0;
      Optimizer opt(c, 3);
      Eigen::VectorXd x = Eigen::Vector3d(1, -2, 3);
      const double start = x.squaredNorm();
      for (int e = 0; e < 50; ++e) {
        const Eigen::VectorXd g = 2 * x;
        opt.step(x, g, e);
      }
      CHECK(x.squaredNorm() < start);
      CHECK(parse_optimizer(to_string(kind)) == kind);
    }
  }

  TEST_CASE("training is deterministic and the final pass matches inference") {
    const auto a = tiny_arch();
    const auto s = tiny_samples(a, 9, 7);
    for (const auto arch : {Architecture::kRrae, Architecture::kClassicalAe, Architecture::kExtended}) {
      TrainConfig c;
      c.arch = arch;
      c.net = a;
      c.k_max = 2;
      c.r_max = 2;
      c.epochs = 6;
      c.seed = 3;
      c.optimizer.kind = OptimizerKind::kAdam;
      const TrainResult r1 = train(s, c);
      const TrainResult r2 = train(s, c);
      const Prediction again = predict(r1.model, s.inputs, 1);
      const Prediction threaded = predict(r1.model, s.inputs, 3);
      CAPTURE(to_string(arch));
      CHECK(r1.history.totals == r2.history.totals);
      CHECK(again.classes == r1.final_pass.classes);
      CHECK(again.dic == r1.final_pass.dic);
      CHECK(threaded.dic == again.dic);
      CHECK(threaded.reconstruction == again.reconstruction);
      CHECK(r1.history.size() > 0);
      if (arch == Architecture::kExtended) CHECK(r1.m2_pretrained.has_value());
    }
  }

  TEST_CASE("non-finite losses stop training") {
    const auto a = tiny_arch();
    auto s = tiny_samples(a, 6, 8);
    TrainConfig c;
    c.net = a;
    c.k_max = 2;
    c.epochs = 3;
    c.optimizer.learning_rate = 1e300;
    c.optimizer.kind = OptimizerKind::kGradientDescent;
    CHECK_THROWS_AS(train(s, c), NumericError);
  }
}
