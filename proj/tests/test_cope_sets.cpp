#include <cmath>

#include "cope/cope_sets.hpp"
#include "cope/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cope;

namespace {

// Cells of `m` with at least one 8-neighbour outside `m`.
RegionMask inner_boundary(const RegionMask& m) {
  const GridGeometry& g = m.geometry();
  std::vector<std::uint8_t> out(g.size(), 0);
  for (std::size_t r = 0; r < g.ny; ++r) {
    for (std::size_t c = 0; c < g.nx; ++c) {
      if (!m[g.index(c, r)]) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(g.ny) || cc >= static_cast<long>(g.nx)) continue;
          if (!m[g.index(static_cast<std::size_t>(cc), static_cast<std::size_t>(rr))]) out[g.index(c, r)] = 1;
        }
      }
    }
  }
  return RegionMask(g, out);
}

Threshold at(double a) { return Threshold{a, 0.1, 1}; }

}  // namespace

TEST_CASE("zero threshold collapses the three sets") {
  const auto g = GridGeometry::make(10, 9);
  const ScalarField dev = testing::random_field(g, 1, 0);
  const CopeResult r = cope_sets(dev, at(0.0));
  CHECK(r.upper == r.point_estimate);
  CHECK(r.lower == r.point_estimate);
  CHECK(r.band == inner_boundary(r.point_estimate));
  CHECK(contour_band(r) == r.band);
}

TEST_CASE("uniformly large deviation fills every set") {
  const auto g = GridGeometry::make(4, 4);
  const CopeResult r = cope_sets(ScalarField::constant(g, 10.0), at(1.0));
  CHECK(r.upper.count() == 16);
  CHECK(r.point_estimate.count() == 16);
  CHECK(r.lower.count() == 16);
  CHECK(r.band.empty());
}

TEST_CASE("masks match a pointwise threshold scan") {
  const auto g = GridGeometry::make(13, 11);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const ScalarField dev = testing::random_field(g, 2, k, 1.5);
    const CopeResult r = cope_sets(dev, at(0.7));
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(r.upper[i] == (dev[i] >= 0.7));
      CHECK(r.point_estimate[i] == (dev[i] >= 0.0));
      CHECK(r.lower[i] == (dev[i] >= -0.7));
    }
  }
  CHECK_THROWS_AS(cope_sets(ScalarField::constant(g, 1.0), at(-0.1)), ValidationError);
}

TEST_CASE("nesting and monotonicity in a") {
  const auto g = GridGeometry::make(9, 9);
  cope::KeyedStream rng(4, StreamTag::test, 0);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const ScalarField dev = testing::random_field(g, 3, k, 2.0);
    const double a1 = 3.0 * rng.uniform();
    const double a2 = a1 + rng.uniform();
    const CopeResult r1 = cope_sets(dev, at(a1));
    const CopeResult r2 = cope_sets(dev, at(a2));
    CHECK(r1.upper.subset_of(r1.point_estimate));
    CHECK(r1.point_estimate.subset_of(r1.lower));
    CHECK(r2.upper.subset_of(r1.upper));
    CHECK(r1.lower.subset_of(r2.lower));
    CHECK(r1.band.subset_of(r1.lower));
  }
}

TEST_CASE("band contains the boundary of the point estimate") {
  const auto g = GridGeometry::make(15, 12);
  for (std::uint64_t k = 0; k < 100; ++k) {
    const ScalarField dev = testing::random_field(g, 5, k, 2.0);
    const double a = 0.1 * static_cast<double>(k % 20);
    const CopeResult r = cope_sets(dev, at(a));
    CHECK(inner_boundary(r.point_estimate).subset_of(r.band));
    CHECK(r.band.subset_of(r.lower));

    // Both cells flanking a zero crossing sit in the band when they lie in lower.
    const ContourSet cs = extract_boundary(dev, 0.0);
    for (const auto& p : cs.points) {
      for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t cell = p.cells[side];
        CHECK(r.band[cell] == r.lower[cell]);
      }
    }
  }
  // A full upper set leaves nothing in the band.
  const CopeResult full = cope_sets(ScalarField::constant(g, 5.0), at(2.0));
  CHECK(full.band.empty());
}

TEST_CASE("inclusion report") {
  const auto g = GridGeometry::make(3, 3);
  const ScalarField dev(g, {-2, -1, 0, 1, 2, 3, -3, 0.5, 1.5});
  const CopeResult r = cope_sets(dev, at(0.0));
  const InclusionReport same = verify_inclusion(r, r.point_estimate);
  CHECK(same.upper_ok);
  CHECK(same.lower_ok);
  CHECK(same.both_ok);

  const CopeResult wide = cope_sets(dev, at(1.0));
  std::vector<std::uint8_t> truth(9, 0);
  truth[4] = truth[5] = 1;  // upper = {2, 3, 1.5} spills outside
  const InclusionReport rep = verify_inclusion(wide, RegionMask(g, truth));
  CHECK(!rep.upper_ok);
  CHECK(rep.lower_ok);
  CHECK(!rep.both_ok);
  CHECK(rep.upper_violations == wide.upper.minus(RegionMask(g, truth)).count());
  CHECK(rep.lower_violations == RegionMask(g, truth).minus(wide.lower).count());

  CHECK_THROWS_AS(verify_inclusion(r, RegionMask(GridGeometry::make(2, 2))), GeometryError);
}

TEST_CASE("a larger threshold never breaks coverage") {
  const auto g = GridGeometry::make(10, 10);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const ScalarField dev = testing::random_field(g, 6, k, 2.0);
    const RegionMask truth = excursion_set(testing::random_field(g, 7, k, 1.0), 0.0);
    bool ok_before = false;
    for (double a = 0.0; a < 8.0; a += 0.5) {
      const InclusionReport rep = verify_inclusion(cope_sets(dev, at(a)), truth);
      if (ok_before) CHECK(rep.both_ok);
      ok_before = ok_before || rep.both_ok;
    }
    CHECK(verify_inclusion(cope_sets(dev, at(1e300)), truth).both_ok);
  }
}

TEST_CASE("end-to-end estimate on a known signal") {
  const auto g = GridGeometry::make(20, 20);
  const std::size_t n = 40;
  std::vector<double> mu(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = static_cast<double>(g.col_of(i)) - 9.5;
    const double y = static_cast<double>(g.row_of(i)) - 9.5;
    mu[i] = 3.0 * std::exp(-(x * x + y * y) / 30.0);
  }
  const FieldStack noise = testing::random_stack(g, n, 31, 0);
  std::vector<double> data(noise.data().begin(), noise.data().end());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < g.size(); ++i) data[j * g.size() + i] = mu[i] + 0.2 * data[j * g.size() + i];
  }
  const FieldStack Y(g, n, std::move(data));
  const DesignSpec d = build_design(intercept_design(n), 0);

  CopeOptions opt;
  opt.level = 1.5;
  opt.M = 500;
  opt.seed = 99;
  const CopeAnalysis plug = estimate_cope_sets(Y, d, opt);
  CHECK(plug.cope.a.a > 0.0);
  CHECK(plug.cope.level_c == 1.5);
  CHECK(plug.cope.config.seed == 99);
  CHECK(plug.cope.config.M == 500);
  CHECK(plug.cope.sup_sample.region == RegionKind::contour);
  CHECK(plug.cope.upper.subset_of(plug.cope.point_estimate));
  CHECK(plug.cope.point_estimate.subset_of(plug.cope.lower));

  // Same inputs and seed reproduce the result exactly.
  const CopeAnalysis again = estimate_cope_sets(Y, d, opt);
  CHECK(again.cope.sup_sample.values == plug.cope.sup_sample.values);

  opt.boundary = BoundaryMode::domain;
  const CopeAnalysis dom = estimate_cope_sets(Y, d, opt);
  CHECK(dom.cope.sup_sample.region == RegionKind::whole_domain);
  // The contour lies inside the domain, so its threshold is no larger.
  CHECK(plug.cope.a.a <= dom.cope.a.a);

  opt.boundary = BoundaryMode::plugin_cells;
  CHECK(estimate_cope_sets(Y, d, opt).cope.sup_sample.region == RegionKind::cell_mask);

  opt.boundary = BoundaryMode::truth;
  CHECK_THROWS_AS(estimate_cope_sets(Y, d, opt), ValidationError);
  opt.true_target = ScalarField(g, mu);
  CHECK(estimate_cope_sets(Y, d, opt).cope.sup_sample.region == RegionKind::contour);

  // A level above every estimate empties the contour and falls back.
  opt.boundary = BoundaryMode::plugin;
  opt.level = 50.0;
  const CopeAnalysis high = estimate_cope_sets(Y, d, opt);
  CHECK(high.cope.sup_sample.fell_back);
  CHECK(high.cope.point_estimate.empty());
}

TEST_CASE("boundary mode names") {
  CHECK(parse_boundary_mode("plugin") == BoundaryMode::plugin);
  CHECK(parse_boundary_mode("domain") == BoundaryMode::domain);
  CHECK(parse_boundary_mode("true") == BoundaryMode::truth);
  CHECK(parse_boundary_mode("plugin-cells") == BoundaryMode::plugin_cells);
  CHECK(std::string(to_string(BoundaryMode::truth)) == "true");
  CHECK_THROWS_AS(parse_boundary_mode("nope"), ValidationError);
}
