#pragma once

// Simulation laboratory: a three-Gaussian test signal on a 10x10 square
// sampled at 64x64 pixels, three non-stationary noise models, the coverage
// experiment, and the bootstrap-versus-direct-simulation cdf comparison.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cope/cope_sets.hpp"
#include "cope/grid.hpp"

namespace cope {

// 64 x 64 cells covering [0, 10] x [0, 10].
GridGeometry simulation_geometry();

enum class NoiseKind { noise1 = 1, noise2 = 2, noise3 = 3 };

NoiseKind parse_noise_kind(const std::string& text);

// Noise 1: upper half iid N(0,1) pixels, lower half iid N(0,1) on 4x4
//          blocks; Gaussian kernel; x50.
// Noise 2: same pre-field; Laplace kernel; x100.
// Noise 3: upper half iid Laplace (variance 2), lower half iid t(10);
//          Gaussian kernel; x25.
// "Upper half" is rows with row >= ny / 2 (larger y).
struct NoiseSpec {
  NoiseKind kind{NoiseKind::noise1};
  GridGeometry geometry{simulation_geometry()};
  double bandwidth{1.0};  // domain units
  double scaling{50.0};

  static NoiseSpec standard(NoiseKind kind);
  static NoiseSpec standard(NoiseKind kind, const GridGeometry& geometry);
};

// Sum of three isotropic Gaussian bumps with fixed centers, weights and
// radii (see README); positive everywhere.
ScalarField signal_mu(const GridGeometry& geometry);

// Unsmoothed, unscaled pre-field. Keyed by (seed, stream).
ScalarField gen_prefield(const NoiseSpec& spec, std::uint64_t seed, std::uint64_t stream = 0);

// Kernel smoothing with reflective padding followed by scaling.
ScalarField smooth_and_scale(const NoiseSpec& spec, const ScalarField& prefield);

ScalarField gen_noise(const NoiseSpec& spec, std::uint64_t seed, std::uint64_t stream = 0);

// Exact second moments of gen_noise, obtained by pushing every independent
// pre-field unit through the smoothing operator.
struct NoiseMoments {
  ScalarField variance;
  std::vector<double> covariances;  // one per requested pair
};

NoiseMoments noise_moments(const NoiseSpec& spec,
                           std::span<const std::pair<std::size_t, std::size_t>> pairs = {});

enum class ExperimentBoundary { truth, plugin };

const char* to_string(ExperimentBoundary b);
ExperimentBoundary parse_experiment_boundary(const std::string& text);

struct ExperimentConfig {
  NoiseSpec noise{};
  std::size_t n{60};
  double c{4.0 / 3.0};
  double alpha{0.1};
  std::size_t M{1000};
  std::size_t trials{100};
  ExperimentBoundary boundary{ExperimentBoundary::plugin};
  std::uint64_t seed{1};
  // Bypasses the bootstrap and uses this threshold in every trial.
  std::optional<double> forced_a;

  void validate() const;
};

// Parses "key = value" lines (also "key: value"); '#' starts a comment.
// Keys: noise, n, c|level, alpha, M|boot_reps, trials, boundary, seed.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig read_experiment_config(const std::string& path);

struct CoverageReport {
  ExperimentConfig config;
  double coverage_fraction{0.0};
  double binomial_stderr{0.0};
  double mean_a{0.0};
  std::vector<std::uint8_t> trial_ok;
  std::vector<double> trial_a;
  double wall_seconds{0.0};
};

CoverageReport coverage_experiment(const ExperimentConfig& config);

// CSV with columns noise,n,boundary_mode,trials,coverage,stderr,mean_a,
// wall_seconds. Timing is written as NA unless with_timing is set so that
// identical runs produce identical bytes.
void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports,
                        bool with_timing);

struct CdfComparison {
  std::vector<double> direct;     // sorted suprema, direct simulation
  std::vector<double> bootstrap;  // sorted suprema, multiplier bootstrap
  double ks{0.0};
  std::size_t contour_points{0};
};

// Law of sup over the true contour of |eps / sigma| by direct simulation
// versus the bootstrap from a single sample of size n.
CdfComparison cdf_comparison(const NoiseSpec& noise, std::size_t n, std::size_t M,
                             std::size_t direct_trials, std::uint64_t seed, double c = 4.0 / 3.0);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

// Both empirical cdfs evaluated on `points` evenly spaced abscissae; CSV
// columns a,cdf_direct,cdf_bootstrap.
void write_cdf_table(std::ostream& out, const CdfComparison& cmp, std::size_t points);

}  // namespace cope
