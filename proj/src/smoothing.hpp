#pragma once

// Kernel smoothing on a regular grid with symmetric reflective padding.
// Kernels are truncated at four bandwidths and renormalized to sum one.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cope/grid.hpp"

namespace cope::detail {

enum class KernelShape { gaussian, laplace };

// Index into [0, n) with whole-sample symmetric reflection
// (... c b a | a b c ...).
std::size_t reflect_index(long long i, std::size_t n);

class Smoother {
 public:
  Smoother(const GridGeometry& geometry, KernelShape shape, double bandwidth);
  ~Smoother();
  Smoother(const Smoother&) = delete;
  Smoother& operator=(const Smoother&) = delete;

  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  void apply_separable(std::span<const double> in, std::span<double> out) const;
  void apply_fft(std::span<const double> in, std::span<double> out) const;

  GridGeometry geometry_;
  KernelShape shape_;

  // Gaussian: 1-D weights for offsets -r..r along each axis.
  std::vector<double> kx_, ky_;
  long long rx_{0}, ry_{0};

  // Laplace: circular convolution on a padded px_ x py_ grid.
  std::size_t px_{0}, py_{0};
  std::vector<std::complex<double>> kernel_hat_;
  fftw_plan forward_{nullptr};
  fftw_plan backward_{nullptr};
};

// Shared, lazily built smoother for the given configuration.
std::shared_ptr<const Smoother> cached_smoother(const GridGeometry& geometry, KernelShape shape,
                                                double bandwidth);

}  // namespace cope::detail
