#pragma once

#include <Eigen/Dense>

#include <string>

#include "tapelab/error.hpp"

namespace tapelab {

/// Orthonormal latent modes (columns) and their singular values, largest first.
template <typename Scalar>
struct LatentBasis {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix modes;
  Vector singular_values;

  Eigen::Index rank() const { return modes.cols(); }
  Eigen::Index dimension() const { return modes.rows(); }
  bool empty() const { return modes.size() == 0; }

  /// Coordinates of each column of `latent` in the basis (rank x batch).
  template <typename Derived>
  Matrix coefficients(const Eigen::MatrixBase<Derived>& latent) const {
    if (latent.rows() != modes.rows())
      throw ShapeError("LatentBasis: latent dimension " + std::to_string(latent.rows()) +
                       " does not match basis dimension " + std::to_string(modes.rows()));
    return modes.transpose() * latent;
  }

  /// Orthogonal projection onto the span of the modes.
  template <typename Derived>
  Matrix project(const Eigen::MatrixBase<Derived>& latent) const {
    return modes * coefficients(latent);
  }

  /// Largest absolute deviation of U^T U from the identity.
  Scalar orthonormality_error() const {
    const Matrix gram = modes.transpose() * modes;
    return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  }
};

template <typename Scalar>
struct Truncation {
  LatentBasis<Scalar> basis;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> alphas;   // k x batch
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> reduced;  // d x batch, rank <= k
};

/// Leading `k` left singular vectors of `latent` (d x batch).
template <typename Derived>
LatentBasis<typename Derived::Scalar> leading_modes(const Eigen::MatrixBase<Derived>& latent,
                                                    Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index limit = std::min(latent.rows(), latent.cols());
  if (k < 1 || k > limit)
    throw InvalidArgument("truncate: rank " + std::to_string(k) + " outside [1, " +
                          std::to_string(limit) + "]");
  Eigen::BDCSVD<Matrix> svd(latent.derived(), Eigen::ComputeThinU);
  LatentBasis<Scalar> basis;
  basis.modes = svd.matrixU().leftCols(k);
  basis.singular_values = svd.singularValues().head(k);
  return basis;
}

/// Best rank-k approximation of the latent batch: Y_r = U_k U_k^T Y.
/// `alphas` are the coordinates U_k^T Y, which equal Sigma_k V_k^T of the SVD.
template <typename Derived>
Truncation<typename Derived::Scalar> truncate(const Eigen::MatrixBase<Derived>& latent,
                                              Eigen::Index k) {
  Truncation<typename Derived::Scalar> out;
  out.basis = leading_modes(latent, k);
  out.alphas = out.basis.coefficients(latent);
  out.reduced = out.basis.modes * out.alphas;
  return out;
}

}  // namespace tapelab
