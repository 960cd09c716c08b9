#pragma once

#include <Eigen/Core>

#include <string_view>

#include "tapelab/error.hpp"

namespace tapelab {

/// Sum over columns of ||pred_b - target_b|| / ||target_b||.
///
/// When `grad` is given it receives d(loss)/d(pred); a column that matches its target
/// exactly contributes a zero gradient. Throws DegenerateInput for a zero-norm target
/// column, naming `term`.
template <typename DerivedP, typename DerivedT>
double relative_l2(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& target,
                   Eigen::MatrixXd* grad = nullptr, std::string_view term = "loss") {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError(std::string(term) + ": prediction " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " vs target " + std::to_string(target.rows()) +
                     "x" + std::to_string(target.cols()));
  if (grad) grad->resize(pred.rows(), pred.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < pred.cols(); ++b) {
    const double tn = target.col(b).norm();
    if (!(tn > 0))
      throw DegenerateInput(std::string(term) + ": target column " + std::to_string(b) +
                            " has zero norm");
    const Eigen::VectorXd diff = pred.col(b) - target.col(b);
    const double dn = diff.norm();
    total += dn / tn;
    if (grad) {
      if (dn > 0)
        grad->col(b) = diff / (dn * tn);
      else
        grad->col(b).setZero();
    }
  }
  return total;
}

}  // namespace tapelab
