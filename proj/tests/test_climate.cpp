#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "cope/climate.hpp"
#include "cope/errors.hpp"
#include "cope/report.hpp"
#include "cope/selftest.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cope;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cope_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::vector<double> equally_spaced(std::size_t n, double start = 0.0) {
  std::vector<double> t(n);
  for (std::size_t j = 0; j < n; ++j) t[j] = start + static_cast<double>(j);
  return t;
}

SurrogateSpec small_surrogate(double noise_sd = 0.3) {
  SurrogateSpec s;
  s.nx = 40;
  s.ny = 30;
  s.disk_radius = 4.0;
  s.noise_sd = noise_sd;
  return s;
}

AnalyzeConfig quick_config(double alpha = 0.1) {
  AnalyzeConfig c;
  c.M = 400;
  c.seed = 17;
  c.alpha = alpha;
  return c;
}

}  // namespace

TEST_CASE("two-period design with two layers per period") {
  const std::vector<double> t{-0.5, 0.5};
  const TwoPeriodDesign d = build_two_period_design(t, t);
  Eigen::Matrix4d want;
  want << 2, 2, 0, 0, 2, 4, 0, 0, 0, 0, 0.5, 0, 0, 0, 0, 0.5;
  CHECK((d.design.xtx() - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(d.shift_a == 0.0);
  CHECK(d.design.n() == 4);
  CHECK(d.design.p() == 4);
  // Rows: period a is (0, 1, t, 0), period b is (1, 1, 0, t).
  CHECK(d.design.X()(0, 0) == 0.0);
  CHECK(d.design.X()(0, 2) == -0.5);
  CHECK(d.design.X()(3, 0) == 1.0);
  CHECK(d.design.X()(3, 3) == 0.5);
}

TEST_CASE("equally spaced two-period constants") {
  for (std::size_t n : {4u, 10u, 58u, 200u}) {
    CAPTURE(n);
    const auto t = equally_spaced(n / 2);
    const TwoPeriodDesign d = build_two_period_design(t, t);
    const double nn = static_cast<double>(n);
    CHECK(std::fabs(d.design.xtx_inv()(0, 0) - 4.0 / nn) < 1e-12);
    CHECK(std::fabs(d.design.pi_n() - 4.0 / nn) < 1e-12);
    CHECK(std::fabs(d.design.scale() - 2.0 / std::sqrt(nn)) <= 1e-10);
    CHECK(std::fabs(d.design.v().norm() - 1.0) <= 1e-10);
    // Block structure: [[n/2, n/2], [n/2, n]] and diag(omega_a, omega_b).
    CHECK(d.design.xtx()(0, 0) == doctest::Approx(nn / 2));
    CHECK(d.design.xtx()(0, 1) == doctest::Approx(nn / 2));
    CHECK(d.design.xtx()(1, 1) == doctest::Approx(nn));
    CHECK(std::fabs(d.design.xtx()(0, 2)) < 1e-12);
    CHECK(std::fabs(d.design.xtx()(2, 3)) < 1e-12);
  }
}

TEST_CASE("time covariates are centered with the shift recorded") {
  const TwoPeriodDesign d = build_two_period_design(equally_spaced(29, 1971), equally_spaced(29, 2041));
  CHECK(d.shift_a == doctest::Approx(1985.0));
  CHECK(d.shift_b == doctest::Approx(2055.0));
  double sa = 0, sb = 0;
  for (double t : d.t_a) sa += t;
  for (double t : d.t_b) sb += t;
  CHECK(std::fabs(sa) < 1e-9);
  CHECK(std::fabs(sb) < 1e-9);
  CHECK(d.design.scale() == doctest::Approx(2.0 / std::sqrt(58.0)).epsilon(1e-12));
}

TEST_CASE("two-period design errors") {
  CHECK_THROWS_AS(build_two_period_design(std::vector<double>{1.0}, equally_spaced(3)), ValidationError);
  CHECK_THROWS_AS(build_two_period_design(std::vector<double>{2.0, 2.0, 2.0}, equally_spaced(3)), DesignError);
  CHECK_THROWS_AS(build_two_period_design(equally_spaced(3), std::vector<double>{5.0, 5.0}), DesignError);
}

TEST_CASE("stack file round trip is bitwise") {
  TempDir dir;
  const auto g = GridGeometry::make(9, 6, 0.25, 0.5, -130.0, 22.5);
  const FieldStack s = testing::random_stack(g, 4, 3, 0);
  write_grid_stack(dir / "s.bin", s);
  CHECK(fs::file_size(dir / "s.bin") == 56 + 9 * 6 * 4 * 8);
  const FieldStack back = read_grid_stack(dir / "s.bin");
  CHECK(back.geometry() == g);
  CHECK(back.layers() == 4);
  CHECK(!back.has_mask());
  CHECK(std::memcmp(back.data().data(), s.data().data(), s.data().size() * sizeof(double)) == 0);

  // Header bytes as documented.
  std::ifstream raw(dir / "s.bin", std::ios::binary);
  unsigned char h[24];
  raw.read(reinterpret_cast<char*>(h), 24);
  CHECK(std::memcmp(h, "COPE", 4) == 0);
  CHECK(h[4] == 1);
  CHECK(h[8] == 9);
  CHECK(h[12] == 6);
  CHECK(h[16] == 4);
  CHECK(h[20] == 1);
  CHECK(h[21] == 1);
}

TEST_CASE("missing values become masked cells") {
  TempDir dir;
  const auto g = GridGeometry::make(3, 3);
  std::vector<double> data(2 * 9, 1.0);
  data[9 + 4] = std::numeric_limits<double>::quiet_NaN();
  write_grid_stack(dir / "m.bin", FieldStack(g, 2, data));
  const FieldStack back = read_grid_stack(dir / "m.bin");
  CHECK(back.has_mask());
  CHECK(!back.inside(4));
  CHECK(back.domain().count() == 8);
}

TEST_CASE("column-major payloads are transposed on read") {
  TempDir dir;
  const auto g = GridGeometry::make(3, 2);
  const FieldStack s(g, 1, {0, 1, 2, 10, 11, 12});
  write_grid_stack(dir / "c.bin", s);
  // Rewrite as column-major: (col 0: 0, 10), (col 1: 1, 11), (col 2: 2, 12).
  std::fstream f(dir / "c.bin", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(21);
  f.put(0);
  const double cm[6] = {0, 10, 1, 11, 2, 12};
  f.seekp(56);
  f.write(reinterpret_cast<const char*>(cm), sizeof cm);
  f.close();
  const FieldStack back = read_grid_stack(dir / "c.bin");
  CHECK(std::equal(back.data().begin(), back.data().end(), s.data().begin()));
}

TEST_CASE("corrupt stack files are rejected") {
  TempDir dir;
  const FieldStack s = testing::random_stack(GridGeometry::make(4, 4), 2, 1, 0);
  write_grid_stack(dir / "ok.bin", s);
  std::ifstream in(dir / "ok.bin", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(read_grid_stack(write("magic.bin", bad_magic)), IngestError);
  std::string bad_version = bytes;
  bad_version[4] = 7;
  CHECK_THROWS_AS(read_grid_stack(write("version.bin", bad_version)), IngestError);
  std::string bad_type = bytes;
  bad_type[20] = 2;
  CHECK_THROWS_AS(read_grid_stack(write("type.bin", bad_type)), IngestError);
  CHECK_THROWS_AS(read_grid_stack(write("short.bin", bytes.substr(0, bytes.size() - 8))), IngestError);
  CHECK_THROWS_AS(read_grid_stack(write("header.bin", bytes.substr(0, 20))), IngestError);
  CHECK_THROWS_AS(read_grid_stack(dir / "absent.bin"), IngestError);
}

TEST_CASE("covariate sidecar") {
  TempDir dir;
  const std::vector<LayerCovariate> rows = {{0, 'a', 1971.0}, {1, 'b', 2041.5}, {2, 'a', 1972.0}};
  write_covariates(dir / "cov.csv", rows);
  const auto back = read_covariates(dir / "cov.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].layer == 1);
  CHECK(back[1].period == 'b');
  CHECK(back[1].time == 2041.5);

  std::ofstream(dir / "bad.csv") << "layer_index,period,time\n0,c,1.0\n";
  CHECK_THROWS_AS(read_covariates(dir / "bad.csv"), IngestError);
  std::ofstream(dir / "bad2.csv") << "layer_index,period,time\n0,a\n";
  CHECK_THROWS_AS(read_covariates(dir / "bad2.csv"), IngestError);
  std::ofstream(dir / "bad3.csv") << "layer_index,period,time\nx,a,3\n";
  CHECK_THROWS_AS(read_covariates(dir / "bad3.csv"), IngestError);
}

TEST_CASE("analyze checks covariate coverage") {
  const Surrogate s = make_surrogate(small_surrogate());
  auto cov = s.covariates;
  cov.pop_back();
  CHECK_THROWS_AS(analyze(s.stack, cov, quick_config()), IngestError);
  cov = s.covariates;
  cov[3].layer = 2;
  CHECK_THROWS_AS(analyze(s.stack, cov, quick_config()), IngestError);
  cov = s.covariates;
  cov[0].layer = 999;
  CHECK_THROWS_AS(analyze(s.stack, cov, quick_config()), IngestError);
}

TEST_CASE("surrogate analysis recovers the warming disk") {
  const Surrogate s = make_surrogate(small_surrogate());
  CHECK(s.stack.layers() == 58);
  const AnalyzeOutput out = analyze(s.stack, s.covariates, quick_config());
  const CopeResult& r = out.analysis.cope;
  CHECK(!out.notices.empty());
  CHECK(out.design.design.scale() == doctest::Approx(2.0 / std::sqrt(58.0)).epsilon(1e-12));

  // Deviation equals sqrt(n)/2 (bhat - c) / sigma_hat.
  const auto& f = out.analysis.fit;
  for (std::size_t i = 0; i < f.sigma_hat.size(); i += 37) {
    const double want = std::sqrt(58.0) / 2.0 * (f.bhat[0][i] - 2.0) / f.sigma_hat[i];
    CHECK(out.analysis.deviation[i] == doctest::Approx(want).epsilon(1e-10));
  }

  // Disk cells at least one cell in from the rim are in the upper set.
  const GridGeometry& g = s.stack.geometry();
  const RegionMask disk = excursion_set(s.true_difference, 2.0);
  const RegionMask rim = dilate8(disk.complement());
  const RegionMask interior = disk.minus(rim);
  CHECK(interior.count() > 20);
  CHECK(interior.subset_of(r.upper));
  CHECK(verify_inclusion(r, disk).both_ok);
  CHECK(g.nx == 40);

  // Same inputs and seed give the same answer.
  const AnalyzeOutput again = analyze(s.stack, s.covariates, quick_config());
  CHECK(again.analysis.cope.a.a == r.a.a);
  CHECK(again.analysis.cope.upper == r.upper);
}

TEST_CASE("layer order in the file does not matter") {
  const Surrogate s = make_surrogate(small_surrogate());
  const std::size_t n = s.stack.layers();
  const std::size_t L = s.stack.cells();
  std::vector<double> shuffled(n * L);
  std::vector<LayerCovariate> cov(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t dst = (j * 17) % n;
    std::copy(s.stack.layer(j).begin(), s.stack.layer(j).end(), shuffled.begin() + dst * L);
    cov[dst] = s.covariates[j];
    cov[dst].layer = dst;
  }
  const AnalyzeOutput a = analyze(s.stack, s.covariates, quick_config());
  const AnalyzeOutput b = analyze(FieldStack(s.stack.geometry(), n, shuffled), cov, quick_config());
  CHECK(a.analysis.cope.upper == b.analysis.cope.upper);
  CHECK(a.analysis.cope.lower == b.analysis.cope.lower);
}

TEST_CASE("zero-noise surrogate gives identical sets equal to the truth") {
  const Surrogate s = make_surrogate(small_surrogate(0.0));
  const AnalyzeOutput out = analyze(s.stack, s.covariates, quick_config());
  const CopeResult& r = out.analysis.cope;
  const RegionMask truth = excursion_set(s.true_difference, 2.0);
  CHECK(r.upper == truth);
  CHECK(r.point_estimate == truth);
  CHECK(r.lower == truth);
  CHECK(r.config.floored_cells == truth.size());

  AnalyzeConfig strict = quick_config();
  strict.fit.floor = FloorPolicy::strict;
  CHECK_THROWS_AS(analyze(s.stack, s.covariates, strict), ZeroVarianceError);
}

TEST_CASE("threshold is monotone in alpha and high levels fall back") {
  const Surrogate s = make_surrogate(small_surrogate());
  const double a10 = analyze(s.stack, s.covariates, quick_config(0.1)).analysis.cope.a.a;
  const double a50 = analyze(s.stack, s.covariates, quick_config(0.5)).analysis.cope.a.a;
  CHECK(a50 <= a10);

  AnalyzeConfig high = quick_config();
  high.level = 100.0;
  const AnalyzeOutput out = analyze(s.stack, s.covariates, high);
  CHECK(out.analysis.cope.point_estimate.empty());
  CHECK(out.analysis.cope.sup_sample.fell_back);
  CHECK(!out.analysis.cope.sup_sample.warnings.empty());
}

TEST_CASE("json and csv reports") {
  const Surrogate s = make_surrogate(small_surrogate());
  const CopeResult r = analyze(s.stack, s.covariates, quick_config()).analysis.cope;
  const nlohmann::json j = to_json(r);
  CHECK(j["threshold"]["a"].get<double>() == r.a.a);
  CHECK(j["config"]["M"].get<std::size_t>() == 400);
  CHECK(j["config"]["seed"].get<std::uint64_t>() == 17);
  CHECK(j["config"]["boundary"].get<std::string>() == "plugin");
  CHECK(j["counts"]["upper"].get<std::size_t>() == r.upper.count());
  CHECK(j["masks"]["lower"].size() == 30);
  CHECK(j["masks"]["lower"][0].size() == 40);

  std::ostringstream csv;
  write_summary_csv(csv, r);
  std::istringstream in(csv.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "level,alpha,a,M,seed,boundary,upper_cells,point_cells,lower_cells,band_cells,floored_cells");
  CHECK(row.find(",400,17,plugin,") != std::string::npos);
}

TEST_CASE("svg rendering") {
  const auto g = GridGeometry::make(12, 10, 0.5, 0.5, -10.0, 40.0);
  const ScalarField bg = testing::random_field(g, 2, 0);
  auto count = [](const std::string& s, const std::string& what) {
    std::size_t k = 0;
    for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++k;
    return k;
  };

  const CopeResult empty = cope_sets(ScalarField::constant(g, -5.0), Threshold{1.0, 0.1, 1});
  const std::string e = render_svg(empty, bg);
  CHECK(count(e, "<path") == 0);
  CHECK(count(e, "<rect") == g.size() + 1);

  // Full lower set, partial upper and point estimate: no green curve.
  std::vector<double> dev(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dev[i] = static_cast<double>(g.col_of(i)) - 4.0;
  const CopeResult part = cope_sets(ScalarField(g, dev), Threshold{2.0, 0.1, 1});
  CHECK(part.lower.count() == g.size() - 2 * g.ny);
  const CopeResult full_lower = cope_sets(ScalarField(g, dev), Threshold{20.0, 0.1, 1});
  const std::string f = render_svg(full_lower, bg);
  CHECK(count(f, "id=\"lower\"") == 0);
  CHECK(count(f, "id=\"point_estimate\"") == 1);
  const std::string p = render_svg(part, bg);
  CHECK(count(p, "id=\"lower\"") == 1);
  CHECK(count(p, "id=\"upper\"") == 1);
  CHECK(count(p, "#800080") == 1);
  CHECK(p.find(">-10.25<") != std::string::npos);  // tick label in physical units

  CHECK_THROWS_AS(render_svg_file("/nonexistent/dir/out.svg", part, bg), ValidationError);
  CHECK_THROWS_AS(render_svg(part, testing::random_field(GridGeometry::make(3, 3), 1, 1)), GeometryError);
}

TEST_CASE("selftest passes") {
  const SelftestReport r = run_selftest(3);
  for (const auto& c : r.checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.passed);
  }
  CHECK(r.ok());
  CHECK(r.passed() == r.checks.size());
}
