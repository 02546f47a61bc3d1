#include "cope/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cope/errors.hpp"

namespace cope {

DesignSpec DesignSpec::build(const Eigen::MatrixXd& X, std::size_t coef_index) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  if (p == 0) throw DesignError("design matrix has no columns");
  if (n < p) {
    throw DesignError("design needs at least as many rows as columns (n = " + std::to_string(n) +
                      ", p = " + std::to_string(p) + ")");
  }
  if (coef_index >= p) {
    throw DesignError("coefficient index " + std::to_string(coef_index) +
                      " out of range for p = " + std::to_string(p));
  }
  if (!X.allFinite()) throw DesignError("design matrix contains non-finite entries");

  DesignSpec d;
  d.X_ = X;
  d.coef_ = coef_index;
  d.xtx_ = X.transpose() * X;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.xtx_);
  if (eig.info() != Eigen::Success) throw DesignError("eigendecomposition of X^T X failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double lmax = lambda(lambda.size() - 1);
  const double lmin = lambda(0);
  d.cond_ = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 0.0) || lmin / lmax <= 1e-12) {
    std::ostringstream msg;
    msg << "X^T X is singular or ill-conditioned (condition number " << d.cond_ << ")";
    throw DesignError(msg.str());
  }

  const Eigen::MatrixXd& Q = eig.eigenvectors();
  d.xtx_inv_ = Q * lambda.cwiseInverse().asDiagonal() * Q.transpose();
  d.xtx_inv_sqrt_ = Q * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose();
  d.solver_ = d.xtx_.ldlt().solve(X.transpose());

  d.pi_n_ = d.xtx_inv_(static_cast<Eigen::Index>(coef_index), static_cast<Eigen::Index>(coef_index));
  if (!(d.pi_n_ > 0.0)) throw DesignError("pi_n is not positive");
  d.v_ = d.xtx_inv_sqrt_.row(static_cast<Eigen::Index>(coef_index)).transpose() / std::sqrt(d.pi_n_);
  d.scale_ = d.v_.norm() * std::sqrt(d.pi_n_);
  if (!(d.scale_ > 0.0)) throw DesignError("scale is not positive");
  return d;
}

Eigen::MatrixXd intercept_design(std::size_t n) {
  return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

FitResult fit(const FieldStack& stack, const DesignSpec& design, const FitOptions& options) {
  const std::size_t n = design.n();
  const std::size_t p = design.p();
  if (stack.layers() != n) {
    throw ValidationError("fit: stack has " + std::to_string(stack.layers()) +
                          " layers but the design has " + std::to_string(n) + " rows");
  }
  if (n <= p) {
    throw DesignError("fit: no residual degrees of freedom (n = " + std::to_string(n) +
                      ", p = " + std::to_string(p) + "); add layers or drop covariates");
  }
  const GridGeometry& g = stack.geometry();
  const std::size_t L = g.size();
  for (std::size_t i = 0; i < L; ++i) {
    if (!stack.inside(i)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(stack.value(j, i))) {
        throw InvalidFieldError("fit: non-finite observation in layer " + std::to_string(j) +
                                " at cell (" + std::to_string(g.col_of(i)) + ", " +
                                std::to_string(g.row_of(i)) + ")");
      }
    }
  }

  // Zero out masked cells so that NaN placeholders cannot leak.
  std::vector<double> y(stack.data().begin(), stack.data().end());
  if (stack.has_mask()) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < L; ++i) {
        if (!stack.inside(i)) y[j * L + i] = 0.0;
      }
    }
  }
  Eigen::Map<const RowMajor> Y(y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L));

  RowMajor B = design.solver() * Y;  // p x L
  RowMajor R = Y - design.X() * B;   // n x L

  const double divisor = options.divisor == VarianceDivisor::n ? static_cast<double>(n)
                                                                : static_cast<double>(n - p);
  std::vector<double> sigma(L, 0.0);
  std::vector<double> ymax(L, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < L; ++i) {
      const double r = R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      sigma[i] += r * r;
      ymax[i] = std::max(ymax[i], std::fabs(y[j * L + i]));
    }
  }
  std::vector<double> inside_sigma;
  inside_sigma.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    sigma[i] = std::sqrt(sigma[i] / divisor);
    if (stack.inside(i)) inside_sigma.push_back(sigma[i]);
  }
  const double floor_abs = options.floor_relative * median_of(std::move(inside_sigma));

  std::vector<std::uint8_t> floored(L, 0);
  std::size_t floored_count = 0;
  for (std::size_t i = 0; i < L; ++i) {
    if (!stack.inside(i)) continue;
    if (sigma[i] <= floor_abs || sigma[i] <= options.floor_relative * ymax[i]) {
      floored[i] = 1;
      ++floored_count;
    }
  }
  if (floored_count > 0 && options.floor == FloorPolicy::strict) {
    throw ZeroVarianceError("fit: " + std::to_string(floored_count) +
                            " cell(s) have numerically zero residual variance");
  }

  std::vector<std::uint8_t> domain(L, 1);
  std::vector<std::uint8_t> valid(L, 1);
  for (std::size_t i = 0; i < L; ++i) {
    domain[i] = stack.inside(i);
    valid[i] = domain[i] && !floored[i];
  }

  std::vector<double> rdata(n * L);
  std::vector<double> ndata(n * L);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < L; ++i) {
      const double r = domain[i] ? R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) : 0.0;
      rdata[j * L + i] = r;
      ndata[j * L + i] = valid[i] ? r / sigma[i] : 0.0;
    }
  }

  std::vector<ScalarField> bhat;
  bhat.reserve(p);
  for (std::size_t k = 0; k < p; ++k) {
    std::vector<double> b(L);
    for (std::size_t i = 0; i < L; ++i) {
      b[i] = domain[i] ? B(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) : 0.0;
    }
    bhat.emplace_back(g, std::move(b), stack.has_mask() ? domain : std::vector<std::uint8_t>{});
  }
  for (std::size_t i = 0; i < L; ++i) {
    if (!domain[i]) sigma[i] = 0.0;
  }

  const std::vector<std::uint8_t> stack_mask =
      stack.has_mask() ? domain : std::vector<std::uint8_t>{};
  return FitResult{std::move(bhat),
                   FieldStack(g, n, std::move(rdata), stack_mask),
                   ScalarField(g, std::move(sigma), stack_mask),
                   FieldStack(g, n, std::move(ndata), valid),
                   RegionMask(g, std::move(floored)),
                   floored_count,
                   options};
}

ScalarField standardized_deviation(const FitResult& fit, const DesignSpec& design, double c) {
  const std::size_t k = design.coef_index();
  if (fit.bhat.size() != design.p() || fit.residuals.layers() != design.n()) {
    throw ValidationError("standardized_deviation: fit was produced by a different design");
  }
  const ScalarField& b = fit.bhat[k];
  const std::size_t L = b.size();
  const double scale = design.scale();
  constexpr double kBig = std::numeric_limits<double>::max();
  std::vector<double> dev(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    if (!b.inside(i)) continue;
    const double diff = b[i] - c;
    if (fit.floored[i]) {
      dev[i] = diff > 0.0 ? kBig : (diff < 0.0 ? -kBig : 0.0);
    } else {
      dev[i] = diff / (scale * fit.sigma_hat[i]);
    }
  }
  return ScalarField(b.geometry(), std::move(dev),
                     std::vector<std::uint8_t>(b.mask().begin(), b.mask().end()));
}

}  // namespace cope
