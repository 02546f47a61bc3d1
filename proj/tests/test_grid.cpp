#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "cope/errors.hpp"
#include "cope/grid.hpp"
#include "cope/simlab.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cope;

namespace {

ScalarField field_2x2(double a, double b, double c, double d) {
  // Rows listed bottom (row 0) first: (a, b ; c, d).
  return ScalarField(GridGeometry::make(2, 2), {a, b, c, d});
}

std::vector<std::uint8_t> scan(const ScalarField& f, double c) {
  std::vector<std::uint8_t> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f.inside(i) && f[i] >= c) ? 1 : 0;
  return out;
}

}  // namespace

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(GridGeometry::make(1, 5), GeometryError);
  CHECK_THROWS_AS(GridGeometry::make(3, 3, 0.0, 1.0), GeometryError);
  CHECK_THROWS_AS(GridGeometry::make(3, 3, 1.0, -2.0), GeometryError);
  const auto g = GridGeometry::make(4, 3, 0.5, 2.0, 10.0, -1.0);
  CHECK(g.size() == 12);
  CHECK(g.index(3, 2) == 11);
  CHECK(g.x(2) == doctest::Approx(11.0));
  CHECK(g.y(1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ScalarField(g, std::vector<double>(5, 0.0)), GeometryError);
}

TEST_CASE("excursion set uses the weak inequality") {
  CHECK(excursion_set(ScalarField::constant(GridGeometry::make(3, 3), 1.0), 2.0).empty());

  const RegionMask m = excursion_set(field_2x2(0, 1, 2, 3), 1.5);
  CHECK(!m[0]);
  CHECK(!m[1]);
  CHECK(m[2]);
  CHECK(m[3]);

  CHECK(excursion_set(field_2x2(1, 1, 1, 1), 1.0).count() == 4);
}

TEST_CASE("excursion set of the simulation signal matches a pointwise scan") {
  const auto g = simulation_geometry();
  const ScalarField mu = signal_mu(g);
  const double c = 4.0 / 3.0;
  const RegionMask A = excursion_set(mu, c);
  std::size_t count = 0;
  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      const bool in = mu.at(col, row) >= c;
      count += in ? 1 : 0;
      CHECK(A[g.index(col, row)] == in);
    }
  }
  CHECK(A.count() == count);
}

TEST_CASE("masked cells and non-finite values") {
  const auto g = GridGeometry::make(2, 2);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ScalarField bad(g, {0.0, nan, 1.0, 2.0});
  CHECK_THROWS_AS(excursion_set(bad, 0.5), InvalidFieldError);
  CHECK_THROWS_AS(extract_boundary(bad, 0.5), InvalidFieldError);

  const ScalarField masked(g, {0.0, nan, 1.0, 2.0}, {1, 0, 1, 1});
  const RegionMask m = excursion_set(masked, 0.5);
  CHECK(m.count() == 2);
  CHECK(!m[1]);
}

TEST_CASE("excursion sets shrink as the level rises") {
  const auto g = GridGeometry::make(9, 7);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const ScalarField f = testing::random_field(g, 11, k);
    const RegionMask lo = excursion_set(f, -0.3);
    const RegionMask hi = excursion_set(f, 0.4);
    CHECK(hi.subset_of(lo));
    CHECK(std::equal(lo.cells().begin(), lo.cells().end(), scan(f, -0.3).begin()));
  }
}

TEST_CASE("boundary of a two-row step sits at the vertical-edge midpoints") {
  const ContourSet cs = extract_boundary(field_2x2(0, 0, 2, 2), 1.0);
  REQUIRE(cs.points.size() == 2);
  std::set<std::pair<double, double>> xy;
  for (const auto& p : cs.points) {
    xy.insert({p.x, p.y});
    CHECK(p.weights[0] == doctest::Approx(0.5));
    CHECK(p.weights[1] == doctest::Approx(0.5));
  }
  CHECK(xy == std::set<std::pair<double, double>>{{0.0, 0.5}, {1.0, 0.5}});
  CHECK(cs.segments.size() == 1);
}

TEST_CASE("constant field has no boundary") {
  const auto g = GridGeometry::make(5, 4);
  CHECK(extract_boundary(ScalarField::constant(g, 3.0), 1.0).empty());
  CHECK(extract_boundary(ScalarField::constant(g, -3.0), 1.0).empty());
}

TEST_CASE("ties at the level count as inside") {
  // Values equal to c are inside, so no edge changes sign.
  CHECK(extract_boundary(field_2x2(1, 1, 2, 2), 1.0).empty());
  const ContourSet cs = extract_boundary(field_2x2(0, 0, 1, 1), 1.0);
  REQUIRE(cs.points.size() == 2);
  for (const auto& p : cs.points) CHECK(p.y == doctest::Approx(1.0));
}

TEST_CASE("saddle resolved by the center average") {
  // Corners bl=1, br=0, tl=0, tr=1; average 0.5 >= 0.5 joins the inside corners.
  const ContourSet cs = extract_boundary(field_2x2(1, 0, 0, 1), 0.5);
  REQUIRE(cs.points.size() == 4);
  REQUIRE(cs.segments.size() == 2);
  std::set<std::set<std::pair<double, double>>> segs;
  for (const auto& s : cs.segments) {
    const auto& a = cs.points[s.from];
    const auto& b = cs.points[s.to];
    segs.insert(std::set<std::pair<double, double>>{{a.x, a.y}, {b.x, b.y}});
  }
  // The outside corners br and tl are cut off.
  using PointSet = std::set<std::pair<double, double>>;
  const std::set<PointSet> want = {
      PointSet{{0.5, 0.0}, {1.0, 0.5}},
      PointSet{{0.5, 1.0}, {0.0, 0.5}},
  };
  CHECK(segs == want);

  // Below the level the inside corners are isolated instead.
  const ContourSet cs2 = extract_boundary(field_2x2(1, 0, 0, 1), 0.6);
  REQUIRE(cs2.segments.size() == 2);
  int near_bl = 0;
  for (const auto& s : cs2.segments) {
    const auto& a = cs2.points[s.from];
    const auto& b = cs2.points[s.to];
    if (a.x + a.y < 0.5 && b.x + b.y < 0.5) ++near_bl;
  }
  CHECK(near_bl == 1);
}

TEST_CASE("edges touching masked cells are skipped") {
  const auto g = GridGeometry::make(3, 2);
  const ScalarField f(g, {0, 0, 0, 2, 2, 2}, {1, 1, 0, 1, 1, 1});
  const ContourSet cs = extract_boundary(f, 1.0);
  CHECK(cs.points.size() == 2);
  for (const auto& p : cs.points) CHECK(p.x < 1.5);
  CHECK(cs.segments.size() == 1);
}

TEST_CASE("contour points interpolate back to the level") {
  const auto g = GridGeometry::make(11, 8, 0.3, 0.7, -1.0, 4.0);
  for (std::uint64_t k = 0; k < 100; ++k) {
    const ScalarField f = testing::random_field(g, 3, k);
    const double c = 0.25;
    const ContourSet cs = extract_boundary(f, c);
    const auto vals = interpolate_on_contour(f, cs);
    for (std::size_t m = 0; m < cs.points.size(); ++m) {
      const auto& p = cs.points[m];
      CHECK(std::fabs(vals[m] - c) <= 1e-10);
      CHECK(p.weights[0] >= 0.0);
      CHECK(p.weights[1] >= 0.0);
      CHECK(p.weights[0] + p.weights[1] == doctest::Approx(1.0));
      // Points lie on the segment between the two flanking centers.
      const double x0 = g.x(g.col_of(p.cells[0])), y0 = g.y(g.row_of(p.cells[0]));
      const double x1 = g.x(g.col_of(p.cells[1])), y1 = g.y(g.row_of(p.cells[1]));
      CHECK(p.x == doctest::Approx(p.weights[0] * x0 + p.weights[1] * x1));
      CHECK(p.y == doctest::Approx(p.weights[0] * y0 + p.weights[1] * y1));
    }
    for (const auto& s : cs.segments) {
      CHECK(s.from < cs.points.size());
      CHECK(s.to < cs.points.size());
    }
  }
}

TEST_CASE("interpolation is bounded by the flanking values") {
  const auto g = GridGeometry::make(6, 5);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const ScalarField f = testing::random_field(g, 5, k);
    const ContourSet cs = extract_boundary(f, 0.0);
    const ScalarField other = testing::random_field(g, 6, k);
    const auto vals = interpolate_on_contour(other, cs);
    for (std::size_t m = 0; m < cs.points.size(); ++m) {
      const double a = other[cs.points[m].cells[0]];
      const double b = other[cs.points[m].cells[1]];
      CHECK(vals[m] >= std::min(a, b) - 1e-14);
      CHECK(vals[m] <= std::max(a, b) + 1e-14);
    }
  }
}

TEST_CASE("interpolating a constant field returns the constant") {
  const auto g = GridGeometry::make(8, 8);
  const ContourSet cs = extract_boundary(testing::random_field(g, 9, 0), 0.0);
  REQUIRE(!cs.empty());
  for (double v : interpolate_on_contour(ScalarField::constant(g, 2.75), cs)) CHECK(v == 2.75);

  ContourSet mid;
  mid.geometry = GridGeometry::make(2, 2);
  mid.points.push_back(ContourPoint{0.5, 0.0, {0, 1}, {0.5, 0.5}});
  CHECK(interpolate_on_contour(field_2x2(0, 2, 5, 5), mid)[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(interpolate_on_contour(ScalarField::constant(g, 1.0), mid), GeometryError);
}

TEST_CASE("signal contour at 4/3 is closed") {
  const auto g = simulation_geometry();
  const ContourSet cs = extract_boundary(signal_mu(g), 4.0 / 3.0);
  REQUIRE(!cs.empty());
  // Every point on a closed curve away from the edge has two incident segments.
  std::vector<int> degree(cs.points.size(), 0);
  for (const auto& s : cs.segments) {
    ++degree[s.from];
    ++degree[s.to];
  }
  for (int d : degree) CHECK(d == 2);
}

TEST_CASE("region mask algebra and dilation") {
  const auto g = GridGeometry::make(5, 5);
  RegionMask centre(g, std::vector<std::uint8_t>(25, 0));
  {
    std::vector<std::uint8_t> v(25, 0);
    v[g.index(2, 2)] = 1;
    centre = RegionMask(g, v);
  }
  const RegionMask d = dilate8(centre);
  CHECK(d.count() == 9);
  CHECK(centre.subset_of(d));
  CHECK(d.minus(centre).count() == 8);
  CHECK(d.complement().count() == 16);
  CHECK(d.unite(centre) == d);
  CHECK(d.intersect(centre) == centre);
  CHECK(RegionMask::full(g).count() == 25);
  CHECK(dilate8(RegionMask(g)).empty());

  std::vector<std::uint8_t> corner(25, 0);
  corner[0] = 1;
  CHECK(dilate8(RegionMask(g, corner)).count() == 4);
}

TEST_CASE("adjacent-cells boundary mode") {
  const ScalarField f(GridGeometry::make(3, 3), {0, 0, 0, 0, 2, 0, 0, 0, 0});
  const RegionMask b = boundary_cells(f, 1.0);
  // The peak and its four edge neighbours touch a crossing; diagonal corners do not.
  CHECK(b.count() == 5);
  CHECK(b[4]);
  CHECK(!b[0]);
}
