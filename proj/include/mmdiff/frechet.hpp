// Fréchet distance between Gaussian moment summaries of two feature sets:
// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}). The product square
// root comes from the eigendecomposition of the symmetrized PSD product
// S_A^{1/2} S_B S_A^{1/2}; eigenvalues below -1e-8 raise, small negatives
// clamp to 0. Rank-deficient or failing covariances get an eps*I ridge
// (eps = 1e-6 * trace / d), and the result records that it happened.
#pragma once

#include <Eigen/Dense>

#include <string>

#include "mmdiff/core.hpp"

namespace mmdiff {

struct FeatureSet {
  Eigen::MatrixXd features;  // n x d, one row per sample
  std::string extractor_id;
};

struct Moments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;  // sample covariance (n - 1 denominator)
};

inline Moments feature_moments(const Eigen::MatrixXd& X) {
  const long n = X.rows();
  if (n < 2) throw config_error("feature_moments: need at least 2 samples");
  Moments m;
  m.mu = X.colwise().mean();
  Eigen::MatrixXd c = X.rowwise() - m.mu.transpose();
  m.cov = c.adjoint() * c / static_cast<double>(n - 1);
  return m;
}

struct FrechetResult {
  double value = 0;
  bool regularized = false;
};

namespace detail {

constexpr double kEigFloor = -1e-8;

// PSD square root; false if an eigenvalue is meaningfully negative.
inline bool psd_sqrt(const Eigen::MatrixXd& a, Eigen::MatrixXd& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) return false;
  Eigen::VectorXd l = es.eigenvalues();
  for (long i = 0; i < l.size(); ++i) {
    if (l[i] < kEigFloor) return false;
    if (l[i] < 0) l[i] = 0;
  }
  out = es.eigenvectors() * l.cwiseSqrt().asDiagonal() *
        es.eigenvectors().transpose();
  return true;
}

// Tr((A B)^{1/2}) via the symmetrized product A^{1/2} B A^{1/2}.
inline bool trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                               double& out) {
  Eigen::MatrixXd ah;
  if (!psd_sqrt(a, ah)) return false;
  Eigen::MatrixXd c = ah * b * ah;
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) return false;
  double tr = 0;
  for (long i = 0; i < c.rows(); ++i) {
    double l = es.eigenvalues()[i];
    if (l < kEigFloor) return false;
    tr += std::sqrt(l < 0 ? 0 : l);
  }
  out = tr;
  return true;
}

inline void ridge(Eigen::MatrixXd& cov) {
  const double d = static_cast<double>(cov.rows());
  cov += (1e-6 * cov.trace() / d) * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
}

}  // namespace detail

inline FrechetResult frechet_distance_full(const FeatureSet& A, const FeatureSet& B) {
  if (A.extractor_id != B.extractor_id)
    throw config_error("frechet_distance: extractor mismatch (" + A.extractor_id +
                       " vs " + B.extractor_id + ")");
  if (A.features.cols() != B.features.cols())
    throw config_error("frechet_distance: feature dimension mismatch");
  const long d = A.features.cols();

  Moments ma = feature_moments(A.features), mb = feature_moments(B.features);
  FrechetResult res;
  // A covariance from fewer than d+1 samples cannot be full rank; ridge it
  // up front rather than relying on the square root to notice.
  if (A.features.rows() < d + 1 || B.features.rows() < d + 1) {
    detail::ridge(ma.cov);
    detail::ridge(mb.cov);
    res.regularized = true;
  }

  double tr_sqrt = 0;
  if (!detail::trace_sqrt_product(ma.cov, mb.cov, tr_sqrt)) {
    detail::ridge(ma.cov);
    detail::ridge(mb.cov);
    res.regularized = true;
    if (!detail::trace_sqrt_product(ma.cov, mb.cov, tr_sqrt))
      throw runtime_fault("frechet_distance: covariance not PSD after regularization");
  }

  double mean_term = (ma.mu - mb.mu).squaredNorm();
  double fd = mean_term + ma.cov.trace() + mb.cov.trace() - 2.0 * tr_sqrt;
  // The exact value is non-negative; tolerate only rounding residue.
  double scale = 1.0 + std::abs(ma.cov.trace()) + std::abs(mb.cov.trace());
  if (fd < -1e-6 * scale)
    throw runtime_fault("frechet_distance: negative distance (numerical failure)");
  res.value = fd < 0 ? 0 : fd;
  return res;
}

inline double frechet_distance(const FeatureSet& A, const FeatureSet& B) {
  return frechet_distance_full(A, B).value;
}

}  // namespace mmdiff
