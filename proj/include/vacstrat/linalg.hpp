#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vacstrat::linalg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct LeastSquares {
  Vec coef;
  Vec residuals;
  Mat xtx_inv;  // (X'X)^-1
};

// Column-pivoted QR least squares. Throws RankError naming a minimal set of
// linearly dependent columns when X is rank deficient.
LeastSquares least_squares(const Mat& x, const Vec& y, std::span<const std::string> names);

// Empty when X has full column rank; otherwise one dependent column together
// with the columns it is a combination of.
std::vector<std::string> dependent_columns(const Mat& x, std::span<const std::string> names);

// Symmetric eigen-decomposition with negative eigenvalues clipped to zero;
// returns L such that L L' equals the repaired matrix.
Mat psd_factor(const Mat& sym, bool* clipped = nullptr);

}  // namespace vacstrat::linalg
