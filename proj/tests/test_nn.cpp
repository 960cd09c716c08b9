#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "tapelab/error.hpp"
#include "tapelab/nn.hpp"
#include "tapelab/serialize.hpp"

using namespace tapelab;
using namespace tapelab::nn;
using tapelab::testing::numeric_gradient;
using tapelab::testing::relative_error;

namespace {

Matrix random_matrix(std::uint64_t seed, Index rows, Index cols) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

// Linear functional of the output with random weights, so every output entry matters.
struct Probe {
  Network net;
  Matrix x;
  Matrix w;
  RunMode mode;

  double value() const { return net.forward(x, nullptr, mode).cwiseProduct(w).sum(); }
};

void check_gradients(const NetworkSpec& spec, RunMode mode = {}, Index batch = 3) {
  Probe p{Network(spec), {}, {}, mode};
  p.net.initialize(11);
  // Nonzero biases exercise the bias paths of the kinks too.
  p.net.parameters() += 0.1 * random_matrix(12, p.net.parameter_count(), 1);
  p.x = random_matrix(13, p.net.input_shape().size(), batch);
  p.w = random_matrix(14, p.net.output_shape().size(), batch);
  REQUIRE(p.net.parameter_count() <= 1000);

  Tape tape;
  p.net.forward(p.x, &tape, mode);
  Vector grad = Vector::Zero(p.net.parameter_count());
  const Matrix gx = p.net.backward(p.w, tape, grad);

  if (p.net.parameter_count() > 0) {
    const Vector fd = numeric_gradient([&] { return p.value(); }, p.net.parameters());
    CHECK(relative_error(grad, fd) <= 1e-4);
  }
  Eigen::Map<Vector> xs(p.x.data(), p.x.size());
  const Vector fdx = numeric_gradient([&] { return p.value(); }, xs);
  CHECK(relative_error(Eigen::Map<const Vector>(gx.data(), gx.size()), fdx) <= 1e-4);

  // Skipping the input gradient leaves the parameter gradient unchanged.
  Vector grad2 = Vector::Zero(p.net.parameter_count());
  CHECK(p.net.backward(p.w, tape, grad2, false).size() == 0);
  CHECK(grad2 == grad);
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("gradients: conv1d") {
    check_gradients({Shape{2, 17}, {Conv1d{3, 5, 1, 2}}});
    check_gradients({Shape{2, 17}, {Conv1d{3, 4, 3, 1}}});
  }
  TEST_CASE("gradients: transposed conv1d") {
    check_gradients({Shape{3, 6}, {ConvTranspose1d{2, 4, 2, 1}}});
    check_gradients({Shape{2, 5}, {ConvTranspose1d{1, 5, 5, 0}}});
    check_gradients({Shape{2, 7}, {ConvTranspose1d{2, 3, 1, 0}}});
  }
  TEST_CASE("gradients: dense") {
    check_gradients({Shape{2, 6}, {Dense{5, true}}});
    check_gradients({Shape{1, 9}, {Dense{4, false}}});
  }
  TEST_CASE("gradients: pooling") {
    check_gradients({Shape{2, 12}, {Conv1d{2, 3, 1, 1}, MaxPool1d{3}}});
    check_gradients({Shape{2, 13}, {Conv1d{2, 3, 1, 1}, AvgPool1d{4}}});
  }
  TEST_CASE("gradients: activations") {
    for (auto fn : {Activation::kRelu, Activation::kSigmoid, Activation::kNone})
      check_gradients({Shape{1, 8}, {Dense{6}, Act{fn}}});
  }
  TEST_CASE("gradients: dropout in training mode") {
    check_gradients({Shape{1, 10}, {Dense{8}, Dropout{0.3}}}, RunMode{true, 99});
  }
  TEST_CASE("gradients: reshape inside a stack") {
    check_gradients({Shape{1, 12},
                     {Dense{8}, Act{Activation::kRelu}, Reshape{2}, ConvTranspose1d{2, 4, 2, 1},
                      Act{Activation::kRelu}, ConvTranspose1d{1, 2, 2, 0}, Act{Activation::kSigmoid}}});
  }

  TEST_CASE("shape chain") {
    const Network net({Shape{1, 500},
                       {Conv1d{8, 5, 1, 2}, Act{Activation::kRelu}, MaxPool1d{4}, Conv1d{16, 3, 1, 1},
                        Act{Activation::kRelu}, MaxPool1d{5}, Dense{64}}});
    CHECK(net.shapes()[3] == Shape{8, 125});
    CHECK(net.shapes()[6] == Shape{16, 25});
    CHECK(net.output_shape() == Shape{1, 64});
    CHECK(net.parameter_count() == (8 * 5 + 8) + (16 * 8 * 3 + 16) + (64 * 400 + 64));
    CHECK_THROWS_AS(Network({Shape{1, 4}, {Conv1d{1, 9, 1, 0}}}), ShapeError);
    CHECK_THROWS_AS(Network({Shape{1, 7}, {Reshape{2}}}), ShapeError);
    CHECK_THROWS_AS(Network({Shape{1, 4}, {MaxPool1d{5}}}), ShapeError);
    Network n({Shape{1, 4}, {Dense{2}}});
    CHECK_THROWS_AS(n.forward(Matrix::Zero(5, 1)), ShapeError);
  }

  TEST_CASE("dropout is the identity outside training") {
    Network n({Shape{1, 6}, {Dropout{0.5}}});
    const Matrix x = random_matrix(1, 6, 4);
    CHECK(n.forward(x) == x);
    const Matrix a = n.forward(x, nullptr, {true, 5});
    CHECK(a == n.forward(x, nullptr, {true, 5}));
    CHECK(a != n.forward(x, nullptr, {true, 6}));
  }

  TEST_CASE("initialization is seeded") {
    const NetworkSpec spec{Shape{1, 10}, {Dense{7}, Act{Activation::kRelu}, Dense{3}}};
    Network a(spec), b(spec), c(spec);
    a.initialize(3);
    b.initialize(3);
    c.initialize(4);
    CHECK(a.parameters() == b.parameters());
    CHECK(checksum(a.parameters()) == checksum(b.parameters()));
    CHECK(a.parameters() != c.parameters());
    CHECK(a.init_seed() == 3);
    CHECK_THROWS_AS(a.restore(Vector::Zero(3), 0), ShapeError);
  }

  TEST_CASE("layer descriptors round-trip through JSON") {
    const NetworkSpec spec{Shape{2, 20},
                           {Conv1d{3, 5, 1, 2}, Act{Activation::kSigmoid}, MaxPool1d{2}, AvgPool1d{5},
                            Dropout{0.25}, Dense{6, false}, Reshape{3}, ConvTranspose1d{1, 4, 2, 1}}};
    const nlohmann::json j = spec;
    const auto back = j.get<NetworkSpec>();
    CHECK(nlohmann::json(back) == j);
    CHECK(Network(back).parameter_count() == Network(spec).parameter_count());
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"type":"lstm"})").get<LayerSpec>(), InvalidArgument);
  }
}

