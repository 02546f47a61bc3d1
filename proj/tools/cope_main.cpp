// cope: command-line front end.
//
//   cope analyze --input stack.bin --covariates cov.csv --out-prefix out
//   cope simulate --noise 1 --n 60 --trials 1000 --boot-reps 1000 --out t1.csv
//   cope make-surrogate --out-prefix surrogate
//   cope cdf --noise 1 --n 60 --boot-reps 5000 --direct 10000 --out cdf.csv
//   cope selftest
//
// Exit status: 0 success, 2 invalid input, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cope/climate.hpp"
#include "cope/errors.hpp"
#include "cope/report.hpp"
#include "cope/selftest.hpp"
#include "cope/simlab.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw cope::ValidationError("cannot open '" + path + "' for writing");
  return out;
}

struct AnalyzeArgs {
  std::string input;
  std::string covariates;
  double level{2.0};
  double alpha{0.1};
  std::size_t boot_reps{1000};
  std::uint64_t seed{0};
  std::string boundary{"plugin"};
  std::string sigma_policy{"exclude"};
  std::string out_prefix{"cope"};
};

int run_analyze(const AnalyzeArgs& args) {
  const cope::FieldStack stack = cope::read_grid_stack(args.input);
  const auto covariates = cope::read_covariates(args.covariates);

  cope::AnalyzeConfig cfg;
  cfg.level = args.level;
  cfg.alpha = args.alpha;
  cfg.M = args.boot_reps;
  cfg.seed = args.seed;
  cfg.boundary = cope::parse_boundary_mode(args.boundary);
  cfg.fit.floor = args.sigma_policy == "strict" ? cope::FloorPolicy::strict : cope::FloorPolicy::exclude;

  const cope::AnalyzeOutput out = cope::analyze(stack, covariates, cfg);
  const cope::CopeResult& r = out.analysis.cope;
  for (const auto& note : out.notices) std::cerr << "note: " << note << '\n';
  for (const auto& w : r.sup_sample.warnings) std::cerr << "warning: " << w << '\n';

  nlohmann::json doc = cope::to_json(r);
  doc["design"] = {{"n_a", out.design.n_a},
                   {"n_b", out.design.n_b},
                   {"shift_a", out.design.shift_a},
                   {"shift_b", out.design.shift_b},
                   {"pi_n", out.design.design.pi_n()},
                   {"scale", out.design.design.scale()},
                   {"condition_number", out.design.design.condition_number()}};
  doc["notices"] = out.notices;
  open_output(args.out_prefix + ".json") << doc.dump(1) << '\n';
  {
    auto csv = open_output(args.out_prefix + "_summary.csv");
    cope::write_summary_csv(csv, r);
  }
  cope::render_svg_file(args.out_prefix + ".svg", r, out.analysis.fit.bhat[0]);

  std::printf("a = %.6g (alpha %.3g, M %zu, seed %llu, boundary %s)\n", r.a.a, r.a.alpha, r.config.M,
              static_cast<unsigned long long>(r.config.seed), cope::to_string(r.config.boundary));
  std::printf("cells: upper %zu, estimate %zu, lower %zu\n", r.upper.count(), r.point_estimate.count(),
              r.lower.count());
  std::printf("wrote %s.json, %s_summary.csv, %s.svg\n", args.out_prefix.c_str(), args.out_prefix.c_str(),
              args.out_prefix.c_str());
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::vector<int> noise{1};
  std::vector<std::size_t> n{60};
  std::size_t trials{100};
  std::size_t boot_reps{1000};
  std::string boundary{"plugin"};
  std::uint64_t seed{1};
  double alpha{0.1};
  double level{4.0 / 3.0};
  bool timing{false};
  std::string out;
};

int run_simulate(const SimulateArgs& args, const CLI::App& cmd) {
  cope::ExperimentConfig base;
  if (!args.config.empty()) base = cope::read_experiment_config(args.config);
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (given("--trials")) base.trials = args.trials;
  if (given("--boot-reps")) base.M = args.boot_reps;
  if (given("--boundary")) base.boundary = cope::parse_experiment_boundary(args.boundary);
  if (given("--seed")) base.seed = args.seed;
  if (given("--alpha")) base.alpha = args.alpha;
  if (given("--level")) base.c = args.level;
  if (args.config.empty()) {
    base.trials = args.trials;
    base.M = args.boot_reps;
  }

  std::vector<int> kinds = args.noise;
  std::vector<std::size_t> sizes = args.n;
  if (!args.config.empty() && !given("--noise")) kinds = {static_cast<int>(base.noise.kind)};
  if (!args.config.empty() && !given("--n")) sizes = {base.n};

  std::vector<cope::CoverageReport> reports;
  for (int k : kinds) {
    for (std::size_t n : sizes) {
      cope::ExperimentConfig cfg = base;
      const auto kind = cope::parse_noise_kind(std::to_string(k));
      if (kind != base.noise.kind || args.config.empty()) cfg.noise = cope::NoiseSpec::standard(kind);
      cfg.n = n;
      cfg.validate();
      reports.push_back(cope::coverage_experiment(cfg));
      const auto& r = reports.back();
      std::fprintf(stderr, "noise %d, n %zu, %s: coverage %.4f +/- %.4f, mean a %.4f (%.1f s)\n", k, n,
                   cope::to_string(cfg.boundary), r.coverage_fraction, r.binomial_stderr, r.mean_a,
                   r.wall_seconds);
    }
  }
  if (args.out.empty()) {
    cope::write_coverage_csv(std::cout, reports, args.timing);
  } else {
    auto out = open_output(args.out);
    cope::write_coverage_csv(out, reports, args.timing);
  }
  return 0;
}

struct SurrogateArgs {
  std::string out_prefix{"surrogate"};
  cope::SurrogateSpec spec;
};

int run_make_surrogate(const SurrogateArgs& args) {
  const cope::Surrogate s = cope::make_surrogate(args.spec);
  const std::string stack_path = args.out_prefix + ".bin";
  const std::string cov_path = args.out_prefix + "_covariates.csv";
  const std::string truth_path = args.out_prefix + "_truth.bin";
  cope::write_grid_stack(stack_path, s.stack);
  cope::write_covariates(cov_path, s.covariates);
  cope::write_grid_stack(truth_path, cope::FieldStack::from_layers({s.true_difference}));
  std::printf("wrote %s (%zux%zu, %zu layers), %s, %s\n", stack_path.c_str(), s.stack.geometry().nx,
              s.stack.geometry().ny, s.stack.layers(), cov_path.c_str(), truth_path.c_str());
  return 0;
}

struct CdfArgs {
  int noise{1};
  std::size_t n{60};
  std::size_t boot_reps{5000};
  std::size_t direct{10000};
  std::uint64_t seed{1};
  std::size_t points{200};
  std::string out;
};

int run_cdf(const CdfArgs& args) {
  const auto spec = cope::NoiseSpec::standard(cope::parse_noise_kind(std::to_string(args.noise)));
  const cope::CdfComparison cmp = cope::cdf_comparison(spec, args.n, args.boot_reps, args.direct, args.seed);
  std::fprintf(stderr, "KS distance %.4f over %zu contour points\n", cmp.ks, cmp.contour_points);
  if (args.out.empty()) {
    cope::write_cdf_table(std::cout, cmp, args.points);
  } else {
    auto out = open_output(args.out);
    cope::write_cdf_table(out, cmp, args.points);
  }
  return 0;
}

int run_selftest(std::uint64_t seed) {
  const cope::SelftestReport report = cope::run_selftest(seed);
  for (const auto& c : report.checks) {
    std::printf("[%s] %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : ": ",
                c.detail.c_str());
  }
  std::printf("%zu/%zu checks passed\n", report.passed(), report.checks.size());
  return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoPE sets: nested confidence regions for excursion sets"};
  app.require_subcommand(1);

  AnalyzeArgs a;
  auto* analyze = app.add_subcommand("analyze", "Two-period trend analysis of a stack file");
  analyze->add_option("--input", a.input, "Stack file (COPE format)")->required();
  analyze->add_option("--covariates", a.covariates, "CSV with layer_index,period,time")->required();
  analyze->add_option("--level", a.level, "Level c for the mean difference")->capture_default_str();
  analyze->add_option("--alpha", a.alpha, "1 - nominal coverage")->capture_default_str();
  analyze->add_option("--boot-reps", a.boot_reps, "Bootstrap replicates M")->capture_default_str();
  analyze->add_option("--seed", a.seed, "Bootstrap seed")->capture_default_str();
  analyze->add_option("--boundary", a.boundary, "Supremum region")
      ->check(CLI::IsMember({"plugin", "domain"}))
      ->capture_default_str();
  analyze->add_option("--sigma-policy", a.sigma_policy, "Zero-variance cells")
      ->check(CLI::IsMember({"exclude", "strict"}))
      ->capture_default_str();
  analyze->add_option("--out-prefix", a.out_prefix, "Prefix for .json, _summary.csv and .svg")
      ->capture_default_str();

  SimulateArgs s;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo coverage experiment");
  simulate->add_option("--config", s.config, "key = value experiment file")->check(CLI::ExistingFile);
  simulate->add_option("--noise", s.noise, "Noise model(s): 1, 2, 3")
      ->delimiter(',')
      ->check(CLI::IsMember({1, 2, 3}));
  simulate->add_option("--n", s.n, "Sample size(s)")->delimiter(',');
  simulate->add_option("--trials", s.trials, "Monte-Carlo trials")->capture_default_str();
  simulate->add_option("--boot-reps", s.boot_reps, "Bootstrap replicates M")->capture_default_str();
  simulate->add_option("--boundary", s.boundary, "Supremum region")
      ->check(CLI::IsMember({"true", "plugin"}))
      ->capture_default_str();
  simulate->add_option("--seed", s.seed, "Experiment seed")->capture_default_str();
  simulate->add_option("--alpha", s.alpha, "1 - nominal coverage")->capture_default_str();
  simulate->add_option("--level", s.level, "Level c")->capture_default_str();
  simulate->add_flag("--timing", s.timing, "Write wall_seconds instead of NA");
  simulate->add_option("--out", s.out, "Output CSV (default stdout)");

  SurrogateArgs g;
  auto* surrogate = app.add_subcommand("make-surrogate", "Synthetic climate-like stack with known truth");
  surrogate->add_option("--out-prefix", g.out_prefix, "Writes <prefix>.bin, _covariates.csv, _truth.bin")
      ->capture_default_str();
  surrogate->add_option("--nx", g.spec.nx)->capture_default_str();
  surrogate->add_option("--ny", g.spec.ny)->capture_default_str();
  surrogate->add_option("--n-a", g.spec.n_a, "Layers in period a")->capture_default_str();
  surrogate->add_option("--n-b", g.spec.n_b, "Layers in period b")->capture_default_str();
  surrogate->add_option("--delta", g.spec.delta, "Mean difference inside the disk")->capture_default_str();
  surrogate->add_option("--radius", g.spec.disk_radius, "Disk radius in degrees")->capture_default_str();
  surrogate->add_option("--noise-sd", g.spec.noise_sd, "Noise standard deviation")->capture_default_str();
  surrogate->add_option("--seed", g.spec.seed)->capture_default_str();

  CdfArgs c;
  auto* cdf = app.add_subcommand("cdf", "Bootstrap versus direct-simulation law of the contour supremum");
  cdf->add_option("--noise", c.noise)->check(CLI::IsMember({1, 2, 3}))->capture_default_str();
  cdf->add_option("--n", c.n)->capture_default_str();
  cdf->add_option("--boot-reps", c.boot_reps)->capture_default_str();
  cdf->add_option("--direct", c.direct, "Direct simulations")->capture_default_str();
  cdf->add_option("--seed", c.seed)->capture_default_str();
  cdf->add_option("--points", c.points, "Rows in the cdf table")->capture_default_str();
  cdf->add_option("--out", c.out, "Output CSV (default stdout)");

  std::uint64_t selftest_seed = 1;
  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");
  selftest->add_option("--seed", selftest_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*analyze) return run_analyze(a);
    if (*simulate) return run_simulate(s, *simulate);
    if (*surrogate) return run_make_surrogate(g);
    if (*cdf) return run_cdf(c);
    if (*selftest) return run_selftest(selftest_seed);
  } catch (const cope::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const cope::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
