#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "langsub/error.hpp"

namespace langsub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Derived>
Matrix to_double(const Eigen::MatrixBase<Derived>& m) {
  return m.template cast<double>();
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Copy of `w` with every nonzero row scaled to unit Euclidean norm; zero
/// rows are dropped.
inline Matrix normalize_rows(const Matrix& w) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    if (w.row(i).norm() > 0.0) keep.push_back(i);
  Matrix out(static_cast<Eigen::Index>(keep.size()), w.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto i = keep[r];
    out.row(static_cast<Eigen::Index>(r)) = w.row(i) / w.row(i).norm();
  }
  return out;
}

/// Orthonormal basis (d x r) of the row space of `w`. Singular values at or
/// below `relative_threshold` times the largest are treated as zero.
inline Matrix rowspace_basis(const Matrix& w, double relative_threshold = 1e-10) {
  if (w.rows() == 0) return Matrix(w.cols(), 0);
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix(w.cols(), 0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > relative_threshold * s(0)) ++rank;
  return svd.matrixV().leftCols(rank);
}

/// Orthonormal basis for the column span of `a`.
inline Matrix orthonormal_columns(const Matrix& a, double relative_threshold = 1e-10) {
  return rowspace_basis(a.transpose(), relative_threshold);
}

/// Numerical rank of a projection-like symmetric matrix. The threshold is
/// relative to max(s_0, 1) so a projection onto {0} with roundoff has rank 0.
inline Eigen::Index numerical_rank(const Matrix& m, double relative_threshold = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0;
  const double cut = relative_threshold * std::max(s(0), 1.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cut) ++rank;
  return rank;
}

/// Principal angles in degrees between span(a) and span(b), ascending; one
/// angle per dimension of the smaller subspace.
inline std::vector<double> principal_angles_deg(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "principal angles need subspaces of the same ambient dimension");
  const Matrix qa = orthonormal_columns(a);
  const Matrix qb = orthonormal_columns(b);
  std::vector<double> out;
  if (qa.cols() == 0 || qb.cols() == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::clamp(svd.singularValues()(i), -1.0, 1.0);
    out.push_back(std::acos(c) * 180.0 / std::numbers::pi);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Orthonormal basis for the range of a symmetric projection matrix
/// (eigenvectors with eigenvalue above one half).
inline Matrix projection_range(const Matrix& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (p + p.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > 0.5) keep.push_back(i);
  Matrix out(p.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]);
  return out;
}

/// Scores of the rows of `x` on its first two principal components. Each
/// component's sign is fixed so its largest-magnitude loading is positive.
inline Matrix pca_2d(const Matrix& x) {
  require(x.rows() >= 1, "PCA needs at least one row");
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  Matrix out = Matrix::Zero(x.rows(), 2);
  if (x.rows() < 2) return out;
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Eigen::Index comps = std::min<Eigen::Index>(2, svd.matrixV().cols());
  for (Eigen::Index c = 0; c < comps; ++c) {
    Vector axis = svd.matrixV().col(c);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    out.col(c) = centered * axis;
  }
  return out;
}

}  // namespace langsub
