#pragma once

// Mass-univariate least squares: Y(s) = X b(s) + e(s) fitted at every cell
// with one shared factorization of X^T X.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "cope/grid.hpp"

namespace cope {

// Design matrix and the constants that turn the deviation of one
// coefficient into an asymptotically unit-variance field:
//   pi_n  = [(X^T X)^{-1}]_{kk}
//   v     = pi_n^{-1/2} (X^T X)^{-1/2} e_k   (symmetric square root)
//   scale = ||v||_2 * pi_n^{1/2}
class DesignSpec {
 public:
  // coef_index is zero-based. Throws DesignError if n < p or the
  // reciprocal condition number of X^T X is at or below 1e-12. Fitting
  // additionally needs n > p.
  static DesignSpec build(const Eigen::MatrixXd& X, std::size_t coef_index);

  std::size_t n() const { return static_cast<std::size_t>(X_.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t coef_index() const { return coef_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& xtx() const { return xtx_; }
  const Eigen::MatrixXd& xtx_inv() const { return xtx_inv_; }
  const Eigen::MatrixXd& xtx_inv_sqrt() const { return xtx_inv_sqrt_; }
  // (X^T X)^{-1} X^T, p x n.
  const Eigen::MatrixXd& solver() const { return solver_; }
  double pi_n() const { return pi_n_; }
  const Eigen::VectorXd& v() const { return v_; }
  double scale() const { return scale_; }
  double condition_number() const { return cond_; }

 private:
  DesignSpec() = default;

  Eigen::MatrixXd X_;
  Eigen::MatrixXd xtx_;
  Eigen::MatrixXd xtx_inv_;
  Eigen::MatrixXd xtx_inv_sqrt_;
  Eigen::MatrixXd solver_;
  Eigen::VectorXd v_;
  std::size_t coef_{0};
  double pi_n_{0.0};
  double scale_{0.0};
  double cond_{0.0};
};

inline DesignSpec build_design(const Eigen::MatrixXd& X, std::size_t coef_index) {
  return DesignSpec::build(X, coef_index);
}

enum class VarianceDivisor { n, n_minus_p };

// What to do with cells whose residual standard deviation is numerically
// zero. `exclude` keeps them out of boundaries and suprema and classifies
// them by the sign of b_k - c; `strict` throws ZeroVarianceError.
enum class FloorPolicy { exclude, strict };

struct FitOptions {
  VarianceDivisor divisor = VarianceDivisor::n;
  FloorPolicy floor = FloorPolicy::exclude;
  // A cell is floored when sigma_hat <= floor_relative * median(sigma_hat)
  // or sigma_hat <= floor_relative * max_j |Y_j(s)|.
  double floor_relative = 1e-12;
};

struct FitResult {
  std::vector<ScalarField> bhat;      // p coefficient surfaces
  FieldStack residuals;               // R = Y - X bhat
  ScalarField sigma_hat;
  FieldStack normalized_residuals;    // R / sigma_hat; floored cells are masked out
  RegionMask floored;                 // cells caught by the sigma floor
  std::size_t floored_count{0};
  FitOptions options;
};

// Throws DesignError when n <= p.
FitResult fit(const FieldStack& stack, const DesignSpec& design, const FitOptions& options = {});

// (bhat_k - c) / (scale * sigma_hat). Floored cells carry +/-DBL_MAX (or 0
// when bhat_k == c exactly) so that thresholding classifies them by sign.
ScalarField standardized_deviation(const FitResult& fit, const DesignSpec& design, double c);

// Intercept-only design with n rows.
Eigen::MatrixXd intercept_design(std::size_t n);

}  // namespace cope
