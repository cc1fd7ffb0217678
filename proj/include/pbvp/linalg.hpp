#pragma once
/*
 * linalg.hpp: dense helpers on top of Eigen: SVD-based pseudoinverse with
 * rank truncation, and the orthogonal projector onto the left null space.
 * Matrices here are small (a handful of resonant coordinates), so full SVDs
 * are cheap and robust.
 */

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>

namespace pbvp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SvdPinv {
  Matrix pinv;              // Moore–Penrose inverse with truncated spectrum
  Eigen::Index rank = 0;    // singular values above rank_tol · σ_max
  Vector singular_values;
  Matrix u;                 // left singular vectors (full)
  Matrix v;                 // right singular vectors (full)
};

// Pseudoinverse via SVD, treating singular values ≤ rank_tol · σ_max as zero.
inline SvdPinv svd_pinv(const Matrix& a, double rank_tol = 1e-10) {
  if (rank_tol < 0.0) throw std::invalid_argument("svd_pinv: rank_tol must be nonnegative");
  SvdPinv out;
  if (a.rows() == 0 || a.cols() == 0) {
    out.pinv = Matrix::Zero(a.cols(), a.rows());
    out.singular_values = Vector::Zero(0);
    out.u = Matrix::Identity(a.rows(), a.rows());
    out.v = Matrix::Identity(a.cols(), a.cols());
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.singular_values = svd.singularValues();
  out.u = svd.matrixU();
  out.v = svd.matrixV();
  const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
  const double cut = rank_tol * smax;
  Vector inv = Vector::Zero(out.singular_values.size());
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) > cut && out.singular_values(i) > 0.0) {
      inv(i) = 1.0 / out.singular_values(i);
      ++out.rank;
    }
  }
  out.pinv = out.v.leftCols(inv.size()) * inv.asDiagonal() *
             out.u.leftCols(inv.size()).transpose();
  return out;
}

// Orthogonal projector onto N(Aᵀ), the complement of the column space of A.
inline Matrix left_null_projector(const Matrix& a, double rank_tol = 1e-10) {
  const SvdPinv s = svd_pinv(a, rank_tol);
  const Eigen::Index m = a.rows();
  if (s.rank == 0) return Matrix::Identity(m, m);
  const Matrix ur = s.u.leftCols(s.rank);
  return Matrix::Identity(m, m) - ur * ur.transpose();
}

// Spectral norm (largest singular value).
inline double spectral_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

}  // namespace pbvp
