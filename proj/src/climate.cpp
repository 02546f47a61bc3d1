#include "cope/climate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cope/errors.hpp"
#include "cope/rng.hpp"
#include "smoothing.hpp"

namespace cope {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'P', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 56;

void put_u32(unsigned char* p, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) p[k] = static_cast<unsigned char>(v >> (8 * k));
}

void put_u64(unsigned char* p, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) p[k] = static_cast<unsigned char>(v >> (8 * k));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

void put_f64(unsigned char* p, double v) { put_u64(p, std::bit_cast<std::uint64_t>(v)); }
double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TwoPeriodDesign build_two_period_design(std::span<const double> t_a, std::span<const double> t_b) {
  if (t_a.size() < 2 || t_b.size() < 2) {
    throw ValidationError("two-period design needs at least two layers in each period (got " +
                          std::to_string(t_a.size()) + " and " + std::to_string(t_b.size()) + ")");
  }
  for (double t : t_a) {
    if (!std::isfinite(t)) throw ValidationError("non-finite time covariate in period a");
  }
  for (double t : t_b) {
    if (!std::isfinite(t)) throw ValidationError("non-finite time covariate in period b");
  }

  const double shift_a = mean_of(t_a);
  const double shift_b = mean_of(t_b);
  std::vector<double> ca, cb;
  for (double t : t_a) ca.push_back(t - shift_a);
  for (double t : t_b) cb.push_back(t - shift_b);

  auto spread = [](const std::vector<double>& t) {
    double w = 0.0;
    for (double x : t) w += x * x;
    return w;
  };
  if (spread(ca) == 0.0) throw DesignError("time covariate is constant within period a; trend m_a is not identifiable");
  if (spread(cb) == 0.0) throw DesignError("time covariate is constant within period b; trend m_b is not identifiable");

  const std::size_t n_a = ca.size();
  const std::size_t n_b = cb.size();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_a + n_b), 4);
  for (std::size_t j = 0; j < n_a; ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    X(r, 1) = 1.0;
    X(r, 2) = ca[j];
  }
  for (std::size_t j = 0; j < n_b; ++j) {
    const auto r = static_cast<Eigen::Index>(n_a + j);
    X(r, 0) = 1.0;
    X(r, 1) = 1.0;
    X(r, 3) = cb[j];
  }
  return TwoPeriodDesign{n_a, n_b, std::move(ca), std::move(cb), shift_a, shift_b, DesignSpec::build(X, 0)};
}

void write_grid_stack(const std::string& path, const FieldStack& stack) {
  const GridGeometry& g = stack.geometry();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");

  unsigned char header[kHeaderBytes] = {};
  std::memcpy(header, kMagic, 4);
  put_u32(header + 4, kVersion);
  put_u32(header + 8, static_cast<std::uint32_t>(g.nx));
  put_u32(header + 12, static_cast<std::uint32_t>(g.ny));
  put_u32(header + 16, static_cast<std::uint32_t>(stack.layers()));
  header[20] = 1;
  header[21] = 1;
  put_f64(header + 24, g.origin_x);
  put_f64(header + 32, g.origin_y);
  put_f64(header + 40, g.spacing_x);
  put_f64(header + 48, g.spacing_y);
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<unsigned char> buf(g.size() * 8);
  for (std::size_t j = 0; j < stack.layers(); ++j) {
    auto layer = stack.layer(j);
    for (std::size_t i = 0; i < g.size(); ++i) {
      put_f64(buf.data() + 8 * i, stack.inside(i) ? layer[i] : nan);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

FieldStack read_grid_stack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open stack file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) {
    throw IngestError("'" + path + "' is too short to hold a stack header (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  const unsigned char* h = bytes.data();
  if (std::memcmp(h, kMagic, 4) != 0) throw IngestError("'" + path + "' does not start with the COPE magic");
  if (get_u32(h + 4) != kVersion) {
    throw IngestError("'" + path + "' has unsupported version " + std::to_string(get_u32(h + 4)));
  }
  const std::size_t nx = get_u32(h + 8);
  const std::size_t ny = get_u32(h + 12);
  const std::size_t n = get_u32(h + 16);
  if (h[20] != 1) throw IngestError("'" + path + "': only float64 values (type 1) are supported");
  const bool row_major = h[21] != 0;
  if (n == 0) throw IngestError("'" + path + "' holds no layers");

  GridGeometry g;
  try {
    g = GridGeometry::make(nx, ny, get_f64(h + 40), get_f64(h + 48), get_f64(h + 24), get_f64(h + 32));
  } catch (const ValidationError& e) {
    throw IngestError("'" + path + "': bad grid header: " + e.what());
  }
  const std::size_t expected = kHeaderBytes + nx * ny * n * 8;
  if (bytes.size() != expected) {
    throw IngestError("'" + path + "': payload is " + std::to_string(bytes.size() - kHeaderBytes) +
                      " bytes, expected " + std::to_string(expected - kHeaderBytes) + " for " +
                      std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(n));
  }

  std::vector<double> data(nx * ny * n);
  std::vector<std::uint8_t> mask(nx * ny, 1);
  bool any_missing = false;
  const unsigned char* p = h + kHeaderBytes;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < nx * ny; ++k) {
      // Column-major files store col * ny + row.
      const std::size_t i = row_major ? k : (k % ny) * nx + k / ny;
      const double v = get_f64(p + 8 * (j * nx * ny + k));
      data[j * nx * ny + i] = v;
      if (!std::isfinite(v)) {
        mask[i] = 0;
        any_missing = true;
      }
    }
  }
  if (!any_missing) mask.clear();
  return FieldStack(g, n, std::move(data), std::move(mask));
}

void write_covariates(const std::string& path, const std::vector<LayerCovariate>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "layer_index,period,time\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%c,%.17g\n", r.layer, r.period, r.time);
    out << buf;
  }
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

std::vector<LayerCovariate> read_covariates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open covariate file '" + path + "'");
  std::vector<LayerCovariate> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("layer_index", 0) == 0) continue;
    std::stringstream ss(line);
    std::string f_layer, f_period, f_time;
    if (!std::getline(ss, f_layer, ',') || !std::getline(ss, f_period, ',') || !std::getline(ss, f_time)) {
      throw IngestError(path + ":" + std::to_string(lineno) + ": expected layer_index,period,time");
    }
    LayerCovariate r;
    try {
      std::size_t used = 0;
      r.layer = std::stoul(f_layer, &used);
      if (used != f_layer.size()) throw std::invalid_argument("trailing");
      r.time = std::stod(f_time, &used);
      if (used != f_time.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw IngestError(path + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    if (f_period != "a" && f_period != "b") {
      throw IngestError(path + ":" + std::to_string(lineno) + ": period must be 'a' or 'b', got '" +
                        f_period + "'");
    }
    r.period = f_period[0];
    rows.push_back(r);
  }
  return rows;
}

AnalyzeOutput analyze(const FieldStack& stack, const std::vector<LayerCovariate>& covariates,
                      const AnalyzeConfig& config) {
  const std::size_t n = stack.layers();
  std::vector<int> seen(n, 0);
  for (const auto& c : covariates) {
    if (c.layer >= n) {
      throw IngestError("covariate row refers to layer " + std::to_string(c.layer) + " but the stack has " +
                        std::to_string(n) + " layers");
    }
    if (seen[c.layer]++) throw IngestError("layer " + std::to_string(c.layer) + " listed twice in the covariates");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!seen[j]) throw IngestError("layer " + std::to_string(j) + " has no covariate row");
  }

  std::vector<LayerCovariate> order(covariates);
  std::stable_sort(order.begin(), order.end(), [](const LayerCovariate& x, const LayerCovariate& y) {
    return x.period != y.period ? x.period < y.period : x.layer < y.layer;
  });
  std::vector<double> t_a, t_b;
  std::vector<double> data;
  data.reserve(n * stack.cells());
  for (const auto& c : order) {
    (c.period == 'a' ? t_a : t_b).push_back(c.time);
    auto layer = stack.layer(c.layer);
    data.insert(data.end(), layer.begin(), layer.end());
  }
  const FieldStack ordered(stack.geometry(), n, std::move(data),
                           std::vector<std::uint8_t>(stack.mask().begin(), stack.mask().end()));

  TwoPeriodDesign design = build_two_period_design(t_a, t_b);
  std::vector<std::string> notices;
  if (design.shift_a != 0.0 || design.shift_b != 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "time covariates centered: subtracted %.6g in period a and %.6g in period b",
                  design.shift_a, design.shift_b);
    notices.emplace_back(buf);
  }

  CopeOptions opt;
  opt.level = config.level;
  opt.alpha = config.alpha;
  opt.M = config.M;
  opt.seed = config.seed;
  opt.boundary = config.boundary;
  opt.fit = config.fit;
  CopeAnalysis analysis = estimate_cope_sets(ordered, design.design, opt);
  return AnalyzeOutput{std::move(design), std::move(analysis), std::move(notices)};
}

Surrogate make_surrogate(const SurrogateSpec& spec) {
  if (spec.n_a < 2 || spec.n_b < 2) throw ValidationError("surrogate needs at least two layers per period");
  if (!(spec.noise_sd >= 0.0)) throw ValidationError("surrogate noise_sd must be non-negative");
  const GridGeometry g = GridGeometry::make(spec.nx, spec.ny, 0.5, 0.5, -125.0, 25.0);
  const double cx = g.x(0) + 0.5 * g.spacing_x * static_cast<double>(g.nx - 1);
  const double cy = g.y(0) + 0.5 * g.spacing_y * static_cast<double>(g.ny - 1);

  std::vector<double> base(g.size()), diff(g.size()), trend_a(g.size()), trend_b(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.x(g.col_of(i));
    const double y = g.y(g.row_of(i));
    base[i] = 25.0 - 0.45 * (y - 25.0) + 2.0 * std::sin(x / 9.0);
    const double r = std::hypot(x - cx, y - cy);
    diff[i] = r <= spec.disk_radius ? spec.delta : 0.0;
    trend_a[i] = 0.01 + 0.005 * std::cos(y / 7.0);
    trend_b[i] = 0.03 + 0.01 * std::sin(x / 11.0);
  }

  // Smoothed white noise rescaled to unit interior variance.
  std::shared_ptr<const detail::Smoother> smoother;
  double unit = 1.0;
  if (spec.noise_sd > 0.0) {
    smoother = detail::cached_smoother(g, detail::KernelShape::gaussian, spec.noise_bandwidth);
    std::vector<double> impulse(g.size(), 0.0), column(g.size());
    impulse[g.index(g.nx / 2, g.ny / 2)] = 1.0;
    smoother->apply(impulse, column);
    double ss = 0.0;
    for (double c : column) ss += c * c;
    unit = 1.0 / std::sqrt(ss);
  }

  const std::size_t n = spec.n_a + spec.n_b;
  std::vector<double> data(n * g.size());
  std::vector<LayerCovariate> cov;
  std::vector<double> white(g.size()), smooth(g.size());
  for (std::size_t j = 0; j < n; ++j) {
    const bool in_a = j < spec.n_a;
    const double year = in_a ? 1971.0 + static_cast<double>(j) : 2041.0 + static_cast<double>(j - spec.n_a);
    const double t = year - (in_a ? 1971.0 + 0.5 * static_cast<double>(spec.n_a - 1)
                                  : 2041.0 + 0.5 * static_cast<double>(spec.n_b - 1));
    cov.push_back({j, in_a ? 'a' : 'b', year});
    if (smoother) {
      KeyedStream rng(spec.seed, StreamTag::surrogate, j);
      for (auto& w : white) w = rng.normal();
      smoother->apply(white, smooth);
    }
    double* dst = data.data() + j * g.size();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = base[i] + (in_a ? trend_a[i] * t : diff[i] + trend_b[i] * t);
      if (smoother) v += spec.noise_sd * unit * smooth[i];
      dst[i] = v;
    }
  }
  return Surrogate{FieldStack(g, n, std::move(data)), std::move(cov), ScalarField(g, std::move(diff))};
}

}  // namespace cope
