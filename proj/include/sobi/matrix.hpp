#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "sobi/error.hpp"

namespace sobi {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::string shape_string(const RealMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const RealMatrix& m) { return m.allFinite(); }

inline void require_finite(const RealMatrix& m, const char* what) {
  if (m.size() == 0)
    throw InvalidArgument(std::string(what) + ": empty matrix");
  if (!m.allFinite())
    throw InvalidArgument(std::string(what) + ": non-finite entry");
}

inline void require_square(const RealMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InvalidArgument(std::string(what) + ": expected a non-empty square matrix, got " +
                          shape_string(m));
}

/// ||QᵀQ − I||_F
inline double orthogonality_error(const RealMatrix& q) {
  return (q.transpose() * q - RealMatrix::Identity(q.cols(), q.cols())).norm();
}

inline bool is_exactly_symmetric(const RealMatrix& m) {
  if (m.rows() != m.cols())
    return false;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = j + 1; i < m.rows(); ++i)
      if (m(i, j) != m(j, i))
        return false;
  return true;
}

/// ½(M + Mᵀ), exactly symmetric bit-for-bit.
inline RealMatrix symmetrized(const RealMatrix& m) {
  RealMatrix s(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    s(j, j) = m(j, j);
    for (Index i = j + 1; i < m.rows(); ++i) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

/// Numerical rank from singular values at `rel_tol` relative to the largest.
inline Index numerical_rank(const RealMatrix& m, double rel_tol = 1e-8) {
  Eigen::BDCSVD<RealMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0)
    return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0))
      ++r;
  return r;
}

} // namespace sobi
