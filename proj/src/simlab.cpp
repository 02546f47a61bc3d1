#include "cope/simlab.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cope/errors.hpp"
#include "cope/glm.hpp"
#include "cope/rng.hpp"
#include "smoothing.hpp"

namespace cope {

namespace {

struct Bump {
  double cx, cy, weight, radius;
};

// Three bumps whose level-4/3 contour is a closed multi-lobe curve.
constexpr std::array<Bump, 3> kBumps = {{
    {3.0, 3.0, 2.0, 1.2},
    {7.0, 3.5, 1.6, 1.0},
    {4.5, 7.0, 1.8, 1.4},
}};

constexpr std::size_t kBlock = 4;
constexpr int kStudentDf = 10;

detail::KernelShape kernel_of(NoiseKind kind) {
  return kind == NoiseKind::noise2 ? detail::KernelShape::laplace : detail::KernelShape::gaussian;
}

bool upper_half(const GridGeometry& g, std::size_t row) { return row >= g.ny / 2; }

// Independent pre-field units: either a single pixel or a 4x4 block.
struct Unit {
  std::vector<std::size_t> cells;
  double variance;
};

std::vector<Unit> prefield_units(const NoiseSpec& spec) {
  const GridGeometry& g = spec.geometry;
  std::vector<Unit> units;
  if (spec.kind == NoiseKind::noise3) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool up = upper_half(g, g.row_of(i));
      units.push_back({{i}, up ? 2.0 : kStudentDf / (kStudentDf - 2.0)});
    }
    return units;
  }
  const std::size_t lower_rows = g.ny / 2;
  for (std::size_t br = 0; br * kBlock < lower_rows; ++br) {
    for (std::size_t bc = 0; bc * kBlock < g.nx; ++bc) {
      Unit u{{}, 1.0};
      for (std::size_t r = br * kBlock; r < std::min(lower_rows, (br + 1) * kBlock); ++r) {
        for (std::size_t c = bc * kBlock; c < std::min(g.nx, (bc + 1) * kBlock); ++c) {
          u.cells.push_back(g.index(c, r));
        }
      }
      units.push_back(std::move(u));
    }
  }
  for (std::size_t r = lower_rows; r < g.ny; ++r) {
    for (std::size_t c = 0; c < g.nx; ++c) units.push_back({{g.index(c, r)}, 1.0});
  }
  return units;
}

}  // namespace

GridGeometry simulation_geometry() {
  constexpr double h = 10.0 / 64.0;
  return GridGeometry::make(64, 64, h, h, 0.5 * h, 0.5 * h);
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "1" || text == "noise1") return NoiseKind::noise1;
  if (text == "2" || text == "noise2") return NoiseKind::noise2;
  if (text == "3" || text == "noise3") return NoiseKind::noise3;
  throw ValidationError("unknown noise kind '" + text + "' (expected 1, 2 or 3)");
}

NoiseSpec NoiseSpec::standard(NoiseKind kind) { return standard(kind, simulation_geometry()); }

NoiseSpec NoiseSpec::standard(NoiseKind kind, const GridGeometry& geometry) {
  NoiseSpec s;
  s.kind = kind;
  s.geometry = geometry;
  s.bandwidth = 1.0;
  switch (kind) {
    case NoiseKind::noise1: s.scaling = 50.0; break;
    case NoiseKind::noise2: s.scaling = 100.0; break;
    case NoiseKind::noise3: s.scaling = 25.0; break;
  }
  return s;
}

ScalarField signal_mu(const GridGeometry& g) {
  std::vector<double> v(g.size());
  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      const double x = g.x(col);
      const double y = g.y(row);
      double acc = 0.0;
      for (const auto& b : kBumps) {
        const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        acc += b.weight * std::exp(-d2 / (2.0 * b.radius * b.radius));
      }
      v[g.index(col, row)] = acc;
    }
  }
  return ScalarField(g, std::move(v));
}

ScalarField gen_prefield(const NoiseSpec& spec, std::uint64_t seed, std::uint64_t stream) {
  const GridGeometry& g = spec.geometry;
  KeyedStream rng(seed, StreamTag::noise, stream);
  std::vector<double> v(g.size(), 0.0);
  if (spec.kind == NoiseKind::noise3) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      v[i] = upper_half(g, g.row_of(i)) ? rng.laplace(1.0) : rng.student_t(kStudentDf);
    }
    return ScalarField(g, std::move(v));
  }
  const std::size_t lower_rows = g.ny / 2;
  const std::size_t block_cols = (g.nx + kBlock - 1) / kBlock;
  const std::size_t block_rows = (lower_rows + kBlock - 1) / kBlock;
  std::vector<double> blocks(block_cols * block_rows);
  for (auto& b : blocks) b = rng.normal();
  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      v[g.index(col, row)] = row < lower_rows
                                 ? blocks[(row / kBlock) * block_cols + col / kBlock]
                                 : rng.normal();
    }
  }
  return ScalarField(g, std::move(v));
}

ScalarField smooth_and_scale(const NoiseSpec& spec, const ScalarField& prefield) {
  require_same_geometry(spec.geometry, prefield.geometry(), "smooth_and_scale");
  auto smoother = detail::cached_smoother(spec.geometry, kernel_of(spec.kind), spec.bandwidth);
  std::vector<double> out(prefield.size());
  smoother->apply(prefield.values(), out);
  for (auto& x : out) x *= spec.scaling;
  return ScalarField(spec.geometry, std::move(out));
}

ScalarField gen_noise(const NoiseSpec& spec, std::uint64_t seed, std::uint64_t stream) {
  return smooth_and_scale(spec, gen_prefield(spec, seed, stream));
}

NoiseMoments noise_moments(const NoiseSpec& spec,
                           std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  const GridGeometry& g = spec.geometry;
  for (const auto& [a, b] : pairs) {
    if (a >= g.size() || b >= g.size()) throw ValidationError("noise_moments: cell out of range");
  }
  auto smoother = detail::cached_smoother(g, kernel_of(spec.kind), spec.bandwidth);
  std::vector<double> var(g.size(), 0.0);
  std::vector<double> cov(pairs.size(), 0.0);
  std::vector<double> impulse(g.size(), 0.0);
  std::vector<double> column(g.size());
  const double s2 = spec.scaling * spec.scaling;
  for (const Unit& u : prefield_units(spec)) {
    for (auto c : u.cells) impulse[c] = 1.0;
    smoother->apply(impulse, column);
    for (auto c : u.cells) impulse[c] = 0.0;
    const double w = u.variance * s2;
    for (std::size_t i = 0; i < g.size(); ++i) var[i] += w * column[i] * column[i];
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      cov[k] += w * column[pairs[k].first] * column[pairs[k].second];
    }
  }
  return NoiseMoments{ScalarField(g, std::move(var)), std::move(cov)};
}

// ---------------------------------------------------------------------------
// Coverage experiment

const char* to_string(ExperimentBoundary b) {
  return b == ExperimentBoundary::truth ? "true" : "plugin";
}

ExperimentBoundary parse_experiment_boundary(const std::string& text) {
  if (text == "true" || text == "truth") return ExperimentBoundary::truth;
  if (text == "plugin") return ExperimentBoundary::plugin;
  throw ValidationError("unknown boundary '" + text + "' (expected true or plugin)");
}

void ExperimentConfig::validate() const {
  if (n < 2) throw ValidationError("experiment needs n >= 2");
  if (trials < 1) throw ValidationError("experiment needs at least one trial");
  if (M < 1) throw ValidationError("experiment needs at least one bootstrap replicate");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (!(noise.scaling > 0.0)) throw ValidationError("noise scaling must be positive");
  if (!std::isfinite(c)) throw ValidationError("level c must be finite");
  if (forced_a && !(*forced_a >= 0.0)) throw ValidationError("forced threshold must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !is.eof()) {
    throw ValidationError("config: cannot parse value '" + value + "' for key '" + key + "'");
  }
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find(':');
    if (sep == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, sep));
    const std::string value = trim(line.substr(sep + 1));
    if (key == "noise") {
      const double scaling_before = cfg.noise.scaling;
      const bool default_scaling = scaling_before == NoiseSpec::standard(cfg.noise.kind).scaling;
      cfg.noise.kind = parse_noise_kind(value);
      if (default_scaling) cfg.noise.scaling = NoiseSpec::standard(cfg.noise.kind).scaling;
    } else if (key == "scaling") {
      cfg.noise.scaling = parse_number<double>(key, value);
    } else if (key == "bandwidth") {
      cfg.noise.bandwidth = parse_number<double>(key, value);
    } else if (key == "n") {
      cfg.n = parse_number<std::size_t>(key, value);
    } else if (key == "c" || key == "level") {
      cfg.c = parse_number<double>(key, value);
    } else if (key == "alpha") {
      cfg.alpha = parse_number<double>(key, value);
    } else if (key == "M" || key == "boot_reps") {
      cfg.M = parse_number<std::size_t>(key, value);
    } else if (key == "trials") {
      cfg.trials = parse_number<std::size_t>(key, value);
    } else if (key == "boundary" || key == "boundary_mode") {
      cfg.boundary = parse_experiment_boundary(value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else {
      throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig read_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return parse_experiment_config(in);
}

CoverageReport coverage_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const GridGeometry& g = config.noise.geometry;
  const ScalarField mu = signal_mu(g);
  const RegionMask truth = excursion_set(mu, config.c);
  const DesignSpec design = build_design(intercept_design(config.n), 0);

  CoverageReport report;
  report.config = config;
  report.trial_ok.assign(config.trials, 0);
  report.trial_a.assign(config.trials, 0.0);

  // Noise streams: substream (trial << 24) | layer under the experiment
  // seed. Bootstrap seeds are derived per trial.
  const std::uint64_t noise_seed = mix64(config.seed ^ 0x6e6f697365ull);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t t = 0; t < config.trials; ++t) {
    std::vector<double> data(config.n * g.size());
    for (std::size_t j = 0; j < config.n; ++j) {
      const ScalarField eps = gen_noise(config.noise, noise_seed, (static_cast<std::uint64_t>(t) << 24) | j);
      double* dst = data.data() + j * g.size();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] = mu[i] + eps[i];
    }
    const FieldStack Y(g, config.n, std::move(data));

    CopeResult cope_result = [&] {
      if (config.forced_a) {
        const FitResult f = fit(Y, design);
        return cope_sets(standardized_deviation(f, design, config.c),
                         Threshold{*config.forced_a, config.alpha, 0});
      }
      CopeOptions opt;
      opt.level = config.c;
      opt.alpha = config.alpha;
      opt.M = config.M;
      opt.seed = mix64(config.seed + 0x9E3779B97F4A7C15ull * (t + 1));
      if (config.boundary == ExperimentBoundary::truth) {
        opt.boundary = BoundaryMode::truth;
        opt.true_target = mu;
      } else {
        opt.boundary = BoundaryMode::plugin;
      }
      return estimate_cope_sets(Y, design, opt).cope;
    }();
    report.trial_ok[t] = verify_inclusion(cope_result, truth).both_ok ? 1 : 0;
    report.trial_a[t] = cope_result.a.a;
  }

  std::size_t hits = 0;
  double a_sum = 0.0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    hits += report.trial_ok[t];
    a_sum += report.trial_a[t];
  }
  const double p = static_cast<double>(hits) / static_cast<double>(config.trials);
  report.coverage_fraction = p;
  report.binomial_stderr = std::sqrt(p * (1.0 - p) / static_cast<double>(config.trials));
  report.mean_a = a_sum / static_cast<double>(config.trials);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports,
                        bool with_timing) {
  out << "noise,n,boundary_mode,trials,coverage,stderr,mean_a,wall_seconds\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%s,%zu,%.6f,%.6f,%.6f,", static_cast<int>(r.config.noise.kind),
                  r.config.n, to_string(r.config.boundary), r.config.trials, r.coverage_fraction,
                  r.binomial_stderr, r.mean_a);
    out << buf;
    if (with_timing) {
      std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
      out << buf << '\n';
    } else {
      out << "NA\n";
    }
  }
}

// ---------------------------------------------------------------------------
// cdf comparison

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

CdfComparison cdf_comparison(const NoiseSpec& noise, std::size_t n, std::size_t M,
                             std::size_t direct_trials, std::uint64_t seed, double c) {
  if (n < 2) throw ValidationError("cdf_comparison: n must be at least 2");
  if (direct_trials < 1) throw ValidationError("cdf_comparison: need at least one direct draw");
  const GridGeometry& g = noise.geometry;
  const ScalarField mu = signal_mu(g);
  const ContourSet contour = extract_boundary(mu, c);
  if (contour.empty()) throw EmptyBoundaryError("cdf_comparison: signal has no contour at this level");

  const NoiseMoments moments = noise_moments(noise);
  std::vector<double> sigma(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) sigma[i] = std::sqrt(moments.variance[i]);

  CdfComparison out;
  out.contour_points = contour.points.size();
  out.direct.assign(direct_trials, 0.0);
  const std::uint64_t direct_seed = mix64(seed ^ 0x646972656374ull);

#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t d = 0; d < direct_trials; ++d) {
    const ScalarField eps = gen_noise(noise, direct_seed, d);
    double sup = 0.0;
    for (const auto& p : contour.points) {
      const double z = p.weights[0] * (eps[p.cells[0]] / sigma[p.cells[0]]) +
                       p.weights[1] * (eps[p.cells[1]] / sigma[p.cells[1]]);
      sup = std::max(sup, std::fabs(z));
    }
    out.direct[d] = sup;
  }

  const std::uint64_t sample_seed = mix64(seed ^ 0x73616d706c65ull);
  std::vector<ScalarField> layers;
  layers.reserve(n);
  for (std::size_t j = 0; j < n; ++j) layers.push_back(gen_noise(noise, sample_seed, j));
  const FieldStack Y = FieldStack::from_layers(layers);
  const DesignSpec design = build_design(intercept_design(n), 0);
  const FitResult f = fit(Y, design);
  SupSample boot = sup_distribution_blocked(f.normalized_residuals, contour, M,
                                            mix64(seed ^ 0x626f6f74ull), 64);
  out.bootstrap = std::move(boot.values);

  std::sort(out.direct.begin(), out.direct.end());
  std::sort(out.bootstrap.begin(), out.bootstrap.end());
  out.ks = ks_distance(out.direct, out.bootstrap);
  return out;
}

void write_cdf_table(std::ostream& out, const CdfComparison& cmp, std::size_t points) {
  if (points < 2) points = 2;
  const double hi = std::max(cmp.direct.empty() ? 0.0 : cmp.direct.back(),
                             cmp.bootstrap.empty() ? 0.0 : cmp.bootstrap.back());
  out << "a,cdf_direct,cdf_bootstrap\n";
  char buf[128];
  for (std::size_t k = 0; k < points; ++k) {
    const double a = hi * static_cast<double>(k) / static_cast<double>(points - 1);
    const auto fd = static_cast<double>(std::upper_bound(cmp.direct.begin(), cmp.direct.end(), a) -
                                        cmp.direct.begin()) /
                    static_cast<double>(std::max<std::size_t>(1, cmp.direct.size()));
    const auto fb = static_cast<double>(std::upper_bound(cmp.bootstrap.begin(), cmp.bootstrap.end(), a) -
                                        cmp.bootstrap.begin()) /
                    static_cast<double>(std::max<std::size_t>(1, cmp.bootstrap.size()));
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", a, fd, fb);
    out << buf;
  }
}

}  // namespace cope
