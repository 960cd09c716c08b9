#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "tapelab/error.hpp"
#include "tapelab/svd.hpp"

using namespace tapelab;

namespace {

Eigen::MatrixXd random_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

}  // namespace

TEST_SUITE("svd") {
  TEST_CASE("truncation is orthonormal, idempotent and Frobenius-optimal") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed + 1000);
      const auto rows = std::uniform_int_distribution<Eigen::Index>(3, 40)(rng);
      const auto cols = std::uniform_int_distribution<Eigen::Index>(3, 40)(rng);
      const auto k = std::uniform_int_distribution<Eigen::Index>(1, std::min(rows, cols))(rng);
      const Eigen::MatrixXd y = random_matrix(seed, rows, cols);
      const auto t = truncate(y, k);
      CAPTURE(seed);

      CHECK(t.basis.orthonormality_error() <= 1e-8);
      const Eigen::MatrixXd p = t.basis.modes * t.basis.modes.transpose();
      CHECK((p * p - p).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((t.basis.project(t.reduced) - t.reduced).cwiseAbs().maxCoeff() <= 1e-8);

      // Oracle: eigenvalues of Y Y^T are the squared singular values.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(y * y.transpose());
      Eigen::VectorXd lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
      double tail = 0;
      for (Eigen::Index i = k; i < lambda.size(); ++i) tail += lambda(i);
      const double err = (y - t.reduced).squaredNorm();
      CHECK(err == doctest::Approx(tail).epsilon(1e-8).scale(y.squaredNorm()));
      for (Eigen::Index i = 0; i < k; ++i)
        CHECK(t.basis.singular_values(i) == doctest::Approx(std::sqrt(lambda(i))).epsilon(1e-8));
      for (Eigen::Index i = 1; i < k; ++i)
        CHECK(t.basis.singular_values(i) <= t.basis.singular_values(i - 1));
      CHECK(t.alphas.isApprox(t.basis.modes.transpose() * y));
    }
  }

  TEST_CASE("rank-k input is reproduced exactly") {
    const Eigen::MatrixXd y = random_matrix(1, 12, 3) * random_matrix(2, 3, 20);
    const auto t = truncate(y, 3);
    CHECK((t.reduced - y).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("works for float scalars") {
    const Eigen::MatrixXf y = random_matrix(3, 8, 10).cast<float>();
    const auto t = truncate(y, 2);
    CHECK(t.basis.orthonormality_error() < 1e-5f);
  }

  TEST_CASE("rank outside the valid range") {
    const Eigen::MatrixXd y = random_matrix(4, 5, 3);
    CHECK_THROWS_AS(truncate(y, 0), InvalidArgument);
    CHECK_THROWS_AS(truncate(y, 4), InvalidArgument);
    LatentBasis<double> b = truncate(y, 2).basis;
    CHECK_THROWS_AS(b.coefficients(Eigen::MatrixXd::Zero(4, 2)), ShapeError);
  }
}
