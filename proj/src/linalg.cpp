#include "vacstrat/linalg.hpp"

#include <cmath>

#include "vacstrat/errors.hpp"

namespace vacstrat::linalg {
namespace {

constexpr double kRankTolerance = 1e-9;

Vec column_scales(const Mat& x) {
  Vec s(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double n = x.col(j).norm();
    s[j] = n > 0 ? n : 1.0;
  }
  return s;
}

}  // namespace

std::vector<std::string> dependent_columns(const Mat& x, std::span<const std::string> names) {
  if (x.cols() == 0) return {};
  const Vec scale = column_scales(x);
  const Mat xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Mat> qr(xs);
  qr.setThreshold(kRankTolerance);
  const Eigen::Index rank = qr.rank();
  if (rank == x.cols()) return {};

  const auto& perm = qr.colsPermutation().indices();
  // Zero columns are dependent on their own.
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (x.col(j).norm() == 0.0) return {names[static_cast<std::size_t>(j)]};
  }
  const Eigen::Index dep = perm[rank];
  Mat basis(x.rows(), rank);
  for (Eigen::Index k = 0; k < rank; ++k) basis.col(k) = xs.col(perm[k]);
  const Vec coef = basis.colPivHouseholderQr().solve(xs.col(dep));
  std::vector<std::string> out{names[static_cast<std::size_t>(dep)]};
  for (Eigen::Index k = 0; k < rank; ++k) {
    if (std::fabs(coef[k]) > 1e-8) out.push_back(names[static_cast<std::size_t>(perm[k])]);
  }
  return out;
}

LeastSquares least_squares(const Mat& x, const Vec& y, std::span<const std::string> names) {
  if (x.rows() < x.cols()) throw RankError("fewer rows than columns in least-squares problem");
  if (auto dep = dependent_columns(x, names); !dep.empty()) {
    std::string list;
    for (const auto& d : dep) list += (list.empty() ? "" : ", ") + d;
    throw RankError("rank-deficient design; dependent columns: " + list);
  }
  LeastSquares out;
  const Vec scale = column_scales(x);
  const Mat xs = x * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Mat> qr(xs);
  out.coef = qr.solve(y).cwiseQuotient(scale);
  out.residuals = y - x * out.coef;

  const Eigen::Index k = x.cols();
  const Mat r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Mat r_inv = r.triangularView<Eigen::Upper>().solve(Mat::Identity(k, k));
  const Mat inv_perm = r_inv * r_inv.transpose();
  const Mat inv_scaled = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  out.xtx_inv = scale.cwiseInverse().asDiagonal() * inv_scaled * scale.cwiseInverse().asDiagonal();
  return out;
}

Mat psd_factor(const Mat& sym, bool* clipped) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()));
  Vec ev = es.eigenvalues();
  bool any = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0) {
      any = any || ev[i] < -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      ev[i] = 0;
    }
  }
  if (clipped) *clipped = any;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace vacstrat::linalg
