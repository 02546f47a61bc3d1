#include "smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "cope/errors.hpp"

namespace cope::detail {

namespace {

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> gaussian_weights(double h_cells, long long& radius) {
  radius = static_cast<long long>(std::floor(4.0 * h_cells));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long long d = -radius; d <= radius; ++d) {
    const double x = static_cast<double>(d) / h_cells;
    const double v = std::exp(-0.5 * x * x);
    w[static_cast<std::size_t>(d + radius)] = v;
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : n(n) {
    data = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  std::size_t n;
  double* data;
};

struct FftwComplexBuffer {
  explicit FftwComplexBuffer(std::size_t n) : n(n) {
    data = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  }
  ~FftwComplexBuffer() { fftw_free(data); }
  FftwComplexBuffer(const FftwComplexBuffer&) = delete;
  FftwComplexBuffer& operator=(const FftwComplexBuffer&) = delete;
  std::size_t n;
  fftw_complex* data;
};

}  // namespace

std::size_t reflect_index(long long i, std::size_t n) {
  const auto period = static_cast<long long>(2 * n);
  long long k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<long long>(n)) k = period - 1 - k;
  return static_cast<std::size_t>(k);
}

Smoother::Smoother(const GridGeometry& geometry, KernelShape shape, double bandwidth)
    : geometry_(geometry), shape_(shape) {
  if (!(bandwidth > 0.0)) throw ValidationError("kernel bandwidth must be positive");
  const double hx = bandwidth / geometry.spacing_x;
  const double hy = bandwidth / geometry.spacing_y;
  if (shape == KernelShape::gaussian) {
    kx_ = gaussian_weights(hx, rx_);
    ky_ = gaussian_weights(hy, ry_);
    return;
  }

  rx_ = static_cast<long long>(std::floor(4.0 * hx));
  ry_ = static_cast<long long>(std::floor(4.0 * hy));
  px_ = next_pow2(geometry.nx + 2 * static_cast<std::size_t>(rx_));
  py_ = next_pow2(geometry.ny + 2 * static_cast<std::size_t>(ry_));
  const std::size_t nc = py_ * (px_ / 2 + 1);

  FftwBuffer real(px_ * py_);
  FftwComplexBuffer spec(nc);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    forward_ = fftw_plan_dft_r2c_2d(static_cast<int>(py_), static_cast<int>(px_), real.data,
                                    spec.data, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(static_cast<int>(py_), static_cast<int>(px_), spec.data,
                                     real.data, FFTW_ESTIMATE);
  }

  // Kernel centered at the origin, wrapped circularly.
  std::fill(real.data, real.data + real.n, 0.0);
  double total = 0.0;
  const double limit = 4.0 * bandwidth;
  for (long long dy = -ry_; dy <= ry_; ++dy) {
    for (long long dx = -rx_; dx <= rx_; ++dx) {
      const double r = std::hypot(static_cast<double>(dx) * geometry.spacing_x,
                                  static_cast<double>(dy) * geometry.spacing_y);
      if (r > limit) continue;
      const double v = std::exp(-r / bandwidth);
      const std::size_t yy = static_cast<std::size_t>((dy + static_cast<long long>(py_)) %
                                                      static_cast<long long>(py_));
      const std::size_t xx = static_cast<std::size_t>((dx + static_cast<long long>(px_)) %
                                                      static_cast<long long>(px_));
      real.data[yy * px_ + xx] = v;
      total += v;
    }
  }
  // Fold in the kernel normalization and the inverse-FFT 1/N factor.
  const double norm = 1.0 / (total * static_cast<double>(px_ * py_));
  for (std::size_t i = 0; i < real.n; ++i) real.data[i] *= norm;
  fftw_execute_dft_r2c(forward_, real.data, spec.data);
  kernel_hat_.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) kernel_hat_[i] = {spec.data[i][0], spec.data[i][1]};
}

Smoother::~Smoother() {
  std::lock_guard<std::mutex> lock(fftw_mutex());
  if (forward_) fftw_destroy_plan(forward_);
  if (backward_) fftw_destroy_plan(backward_);
}

void Smoother::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != geometry_.size() || out.size() != geometry_.size()) {
    throw GeometryError("Smoother::apply: buffer size does not match the grid");
  }
  if (shape_ == KernelShape::gaussian) {
    apply_separable(in, out);
  } else {
    apply_fft(in, out);
  }
}

void Smoother::apply_separable(std::span<const double> in, std::span<double> out) const {
  const std::size_t nx = geometry_.nx;
  const std::size_t ny = geometry_.ny;
  std::vector<double> padded(nx + 2 * static_cast<std::size_t>(rx_));
  std::vector<double> tmp(nx * ny, 0.0);

  for (std::size_t row = 0; row < ny; ++row) {
    const double* src = in.data() + row * nx;
    for (std::size_t k = 0; k < padded.size(); ++k) {
      padded[k] = src[reflect_index(static_cast<long long>(k) - rx_, nx)];
    }
    double* dst = tmp.data() + row * nx;
    for (std::size_t d = 0; d < kx_.size(); ++d) {
      const double w = kx_[d];
      const double* p = padded.data() + d;
      for (std::size_t col = 0; col < nx; ++col) dst[col] += w * p[col];
    }
  }

  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t row = 0; row < ny; ++row) {
    double* dst = out.data() + row * nx;
    for (std::size_t d = 0; d < ky_.size(); ++d) {
      const std::size_t src_row =
          reflect_index(static_cast<long long>(row) + static_cast<long long>(d) - ry_, ny);
      const double w = ky_[d];
      const double* src = tmp.data() + src_row * nx;
      for (std::size_t col = 0; col < nx; ++col) dst[col] += w * src[col];
    }
  }
}

void Smoother::apply_fft(std::span<const double> in, std::span<double> out) const {
  const std::size_t nx = geometry_.nx;
  const std::size_t ny = geometry_.ny;
  const std::size_t nc = py_ * (px_ / 2 + 1);
  FftwBuffer real(px_ * py_);
  FftwComplexBuffer spec(nc);

  // Padded image: padded(y, x) = in(reflect(y - ry), reflect(x - rx)); the
  // rest of the buffer is zero and never reaches the output window.
  std::fill(real.data, real.data + real.n, 0.0);
  const std::size_t wy = ny + 2 * static_cast<std::size_t>(ry_);
  const std::size_t wx = nx + 2 * static_cast<std::size_t>(rx_);
  for (std::size_t y = 0; y < wy; ++y) {
    const std::size_t sr = reflect_index(static_cast<long long>(y) - ry_, ny);
    for (std::size_t x = 0; x < wx; ++x) {
      real.data[y * px_ + x] = in[sr * nx + reflect_index(static_cast<long long>(x) - rx_, nx)];
    }
  }
  fftw_execute_dft_r2c(forward_, real.data, spec.data);
  for (std::size_t i = 0; i < nc; ++i) {
    const std::complex<double> z(spec.data[i][0], spec.data[i][1]);
    const std::complex<double> prod = z * kernel_hat_[i];
    spec.data[i][0] = prod.real();
    spec.data[i][1] = prod.imag();
  }
  fftw_execute_dft_c2r(backward_, spec.data, real.data);
  for (std::size_t row = 0; row < ny; ++row) {
    for (std::size_t col = 0; col < nx; ++col) {
      out[row * nx + col] =
          real.data[(row + static_cast<std::size_t>(ry_)) * px_ + col + static_cast<std::size_t>(rx_)];
    }
  }
}

std::shared_ptr<const Smoother> cached_smoother(const GridGeometry& g, KernelShape shape,
                                                double bandwidth) {
  using Key = std::tuple<std::size_t, std::size_t, double, double, int, double>;
  static std::mutex m;
  static std::map<Key, std::shared_ptr<const Smoother>> cache;
  const Key key{g.nx, g.ny, g.spacing_x, g.spacing_y, static_cast<int>(shape), bandwidth};
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto s = std::make_shared<const Smoother>(g, shape, bandwidth);
  cache.emplace(key, s);
  return s;
}

}  // namespace cope::detail
