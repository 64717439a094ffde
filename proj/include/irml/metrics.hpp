#pragma once

#include "irml/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace irml {

// Dense symmetric metric matrix. Construction symmetrises the input as
// (M + M^T) / 2; positive semi-definiteness is restored by project_psd.
class MetricMatrix {
 public:
  MetricMatrix() = default;
  explicit MetricMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) throw UsageError("MetricMatrix: matrix must be square");
    m_ = 0.5 * (m + m.transpose());
  }

  static MetricMatrix identity(std::ptrdiff_t dim) {
    return MetricMatrix(Matrix::Identity(dim, dim));
  }
  static MetricMatrix scaled_identity(std::ptrdiff_t dim, double s) {
    return MetricMatrix(s * Matrix::Identity(dim, dim));
  }

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] std::ptrdiff_t dim() const { return m_.rows(); }
  [[nodiscard]] double operator()(std::ptrdiff_t i, std::ptrdiff_t j) const { return m_(i, j); }

  // (x - y)^T M (x - y) for a precomputed difference.
  [[nodiscard]] double quadratic_form(const VecRef& diff) const {
    return diff.dot(m_ * diff);
  }

  friend bool operator==(const MetricMatrix& l, const MetricMatrix& r) { return l.m_ == r.m_; }

 private:
  Matrix m_;
};

inline constexpr double kQuadraticFormFloor = 1e-12;

// Non-squared Mahalanobis length sqrt((x_i - x_j)^T M (x_i - x_j)).
inline double mahalanobis_length(const VecRef& xi, const VecRef& xj, const MetricMatrix& metric) {
  require_same_dim(xi.size(), xj.size(), "mahalanobis_length");
  require_same_dim(xi.size(), metric.dim(), "mahalanobis_length");
  const Vector diff = xi - xj;
  double q = metric.quadratic_form(diff);
  if (q < 0.0) {
    if (q < -kQuadraticFormFloor) {
      throw NumericError("mahalanobis_length: negative quadratic form, metric is not PSD");
    }
    q = 0.0;
  }
  return std::sqrt(q);
}

// Frobenius-nearest PSD matrix with eigenvalues clipped at `floor`.
inline MetricMatrix project_psd(const Matrix& m, double floor = 0.0) {
  if (m.rows() != m.cols()) throw UsageError("project_psd: matrix must be square");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("project_psd: eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() >= floor) return MetricMatrix(sym);
  const Vector clipped = eig.eigenvalues().cwiseMax(floor);
  const Matrix& v = eig.eigenvectors();
  return MetricMatrix(v * clipped.asDiagonal() * v.transpose());
}

inline MetricMatrix project_psd(const MetricMatrix& m, double floor = 0.0) {
  return project_psd(m.matrix(), floor);
}

inline double frobenius_norm(const MetricMatrix& m) { return m.matrix().norm(); }

// sqrt of the largest eigenvalue, i.e. the operator norm of M^{1/2}.
inline double spectral_sqrt_norm(const MetricMatrix& m) {
  if (m.dim() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.matrix(), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

inline bool is_psd(const MetricMatrix& m, double tol = 1e-9) {
  if (m.dim() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.matrix(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

}  // namespace irml
