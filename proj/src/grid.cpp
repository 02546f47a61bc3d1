#include "cope/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cope/errors.hpp"

namespace cope {

GridGeometry GridGeometry::make(std::size_t nx, std::size_t ny, double spacing_x,
                                double spacing_y, double origin_x, double origin_y) {
  if (nx < 2 || ny < 2) {
    throw GeometryError("grid needs at least 2x2 cells, got " + std::to_string(nx) + "x" +
                        std::to_string(ny));
  }
  if (!(spacing_x > 0.0) || !(spacing_y > 0.0) || !std::isfinite(spacing_x) ||
      !std::isfinite(spacing_y)) {
    throw GeometryError("grid spacing must be finite and strictly positive");
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw GeometryError("grid origin must be finite");
  }
  return GridGeometry{nx, ny, spacing_x, spacing_y, origin_x, origin_y};
}

void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const char* context) {
  if (!(a == b)) {
    throw GeometryError(std::string(context) + ": geometry mismatch (" + std::to_string(a.nx) +
                        "x" + std::to_string(a.ny) + " vs " + std::to_string(b.nx) + "x" +
                        std::to_string(b.ny) + ")");
  }
}

namespace {

void check_mask_length(const std::vector<std::uint8_t>& mask, std::size_t n, const char* what) {
  if (!mask.empty() && mask.size() != n) {
    throw GeometryError(std::string(what) + ": mask length " + std::to_string(mask.size()) +
                        " does not match cell count " + std::to_string(n));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RegionMask

RegionMask::RegionMask(const GridGeometry& geometry)
    : geometry_(geometry), inside_(geometry.size(), 0) {}

RegionMask::RegionMask(const GridGeometry& geometry, std::vector<std::uint8_t> inside)
    : geometry_(geometry), inside_(std::move(inside)) {
  if (inside_.size() != geometry_.size()) {
    throw GeometryError("RegionMask: length " + std::to_string(inside_.size()) +
                        " does not match cell count " + std::to_string(geometry_.size()));
  }
  for (auto& v : inside_) v = v ? 1 : 0;
}

RegionMask RegionMask::full(const GridGeometry& geometry) {
  return RegionMask(geometry, std::vector<std::uint8_t>(geometry.size(), 1));
}

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), 1));
}

bool RegionMask::subset_of(const RegionMask& other) const {
  require_same_geometry(geometry_, other.geometry_, "RegionMask::subset_of");
  for (std::size_t i = 0; i < inside_.size(); ++i) {
    if (inside_[i] && !other.inside_[i]) return false;
  }
  return true;
}

RegionMask RegionMask::intersect(const RegionMask& other) const {
  require_same_geometry(geometry_, other.geometry_, "RegionMask::intersect");
  std::vector<std::uint8_t> out(inside_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inside_[i] & other.inside_[i];
  return RegionMask(geometry_, std::move(out));
}

RegionMask RegionMask::unite(const RegionMask& other) const {
  require_same_geometry(geometry_, other.geometry_, "RegionMask::unite");
  std::vector<std::uint8_t> out(inside_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inside_[i] | other.inside_[i];
  return RegionMask(geometry_, std::move(out));
}

RegionMask RegionMask::minus(const RegionMask& other) const {
  require_same_geometry(geometry_, other.geometry_, "RegionMask::minus");
  std::vector<std::uint8_t> out(inside_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inside_[i] && !other.inside_[i];
  return RegionMask(geometry_, std::move(out));
}

RegionMask RegionMask::complement() const {
  std::vector<std::uint8_t> out(inside_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inside_[i] ? 0 : 1;
  return RegionMask(geometry_, std::move(out));
}

bool RegionMask::operator==(const RegionMask& other) const {
  return geometry_ == other.geometry_ && inside_ == other.inside_;
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const GridGeometry& geometry, std::vector<double> values,
                         std::vector<std::uint8_t> mask)
    : geometry_(geometry), values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.size() != geometry_.size()) {
    throw GeometryError("ScalarField: " + std::to_string(values_.size()) +
                        " values for a grid of " + std::to_string(geometry_.size()) + " cells");
  }
  check_mask_length(mask_, values_.size(), "ScalarField");
  for (auto& m : mask_) m = m ? 1 : 0;
}

ScalarField ScalarField::constant(const GridGeometry& geometry, double value) {
  return ScalarField(geometry, std::vector<double>(geometry.size(), value));
}

RegionMask ScalarField::domain() const {
  if (mask_.empty()) return RegionMask::full(geometry_);
  return RegionMask(geometry_, mask_);
}

void ScalarField::require_finite(const char* context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (inside(i) && !std::isfinite(values_[i])) {
      throw InvalidFieldError(std::string(context) + ": non-finite value at cell (" +
                              std::to_string(geometry_.col_of(i)) + ", " +
                              std::to_string(geometry_.row_of(i)) + ")");
    }
  }
}

ScalarField ScalarField::with_mask(std::vector<std::uint8_t> mask) const {
  return ScalarField(geometry_, values_, std::move(mask));
}

// ---------------------------------------------------------------------------
// FieldStack

FieldStack::FieldStack(const GridGeometry& geometry, std::size_t n_layers,
                       std::vector<double> data, std::vector<std::uint8_t> mask)
    : geometry_(geometry), n_layers_(n_layers), data_(std::move(data)), mask_(std::move(mask)) {
  if (data_.size() != n_layers_ * geometry_.size()) {
    throw GeometryError("FieldStack: " + std::to_string(data_.size()) + " values for " +
                        std::to_string(n_layers_) + " layers of " +
                        std::to_string(geometry_.size()) + " cells");
  }
  check_mask_length(mask_, geometry_.size(), "FieldStack");
  for (auto& m : mask_) m = m ? 1 : 0;
}

FieldStack FieldStack::from_layers(const std::vector<ScalarField>& layers) {
  if (layers.empty()) throw ValidationError("FieldStack::from_layers: no layers");
  const GridGeometry& g = layers.front().geometry();
  std::vector<double> data;
  data.reserve(layers.size() * g.size());
  std::vector<std::uint8_t> mask;
  bool any_mask = false;
  for (const auto& f : layers) any_mask = any_mask || f.has_mask();
  if (any_mask) mask.assign(g.size(), 1);
  for (const auto& f : layers) {
    require_same_geometry(g, f.geometry(), "FieldStack::from_layers");
    data.insert(data.end(), f.values().begin(), f.values().end());
    if (f.has_mask()) {
      for (std::size_t i = 0; i < g.size(); ++i) mask[i] = mask[i] && f.inside(i);
    }
  }
  return FieldStack(g, layers.size(), std::move(data), std::move(mask));
}

RegionMask FieldStack::domain() const {
  if (mask_.empty()) return RegionMask::full(geometry_);
  return RegionMask(geometry_, mask_);
}

ScalarField FieldStack::layer_field(std::size_t j) const {
  auto l = layer(j);
  return ScalarField(geometry_, std::vector<double>(l.begin(), l.end()), mask_);
}

// ---------------------------------------------------------------------------
// Level sets

RegionMask excursion_set(const ScalarField& field, double c) {
  field.require_finite("excursion_set");
  std::vector<std::uint8_t> inside(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    inside[i] = field.inside(i) && field[i] >= c;
  }
  return RegionMask(field.geometry(), std::move(inside));
}

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Sign-changing edges of the cell-center lattice. Horizontal edge (col,row)
// joins cells (col,row)-(col+1,row); vertical edge (col,row) joins
// (col,row)-(col,row+1).
struct EdgeCrossings {
  std::vector<std::size_t> horizontal;  // point index or kNone
  std::vector<std::size_t> vertical;
};

bool crosses(const ScalarField& f, std::size_t a, std::size_t b, double c) {
  if (!f.inside(a) || !f.inside(b)) return false;
  return (f[a] >= c) != (f[b] >= c);
}

ContourPoint make_point(const ScalarField& f, std::size_t a, std::size_t b, double c) {
  const GridGeometry& g = f.geometry();
  const double fa = f[a];
  const double fb = f[b];
  double t = (c - fa) / (fb - fa);
  if (!(t >= 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  ContourPoint p;
  const double xa = g.x(g.col_of(a));
  const double ya = g.y(g.row_of(a));
  const double xb = g.x(g.col_of(b));
  const double yb = g.y(g.row_of(b));
  p.x = xa + t * (xb - xa);
  p.y = ya + t * (yb - ya);
  p.cells = {a, b};
  p.weights = {1.0 - t, t};
  return p;
}

}  // namespace

ContourSet extract_boundary(const ScalarField& field, double c) {
  field.require_finite("extract_boundary");
  const GridGeometry& g = field.geometry();
  ContourSet out;
  out.geometry = g;
  out.level = c;

  EdgeCrossings edges;
  edges.horizontal.assign(g.size(), kNone);
  edges.vertical.assign(g.size(), kNone);

  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      const std::size_t i = g.index(col, row);
      if (col + 1 < g.nx) {
        const std::size_t j = g.index(col + 1, row);
        if (crosses(field, i, j, c)) {
          edges.horizontal[i] = out.points.size();
          out.points.push_back(make_point(field, i, j, c));
        }
      }
      if (row + 1 < g.ny) {
        const std::size_t j = g.index(col, row + 1);
        if (crosses(field, i, j, c)) {
          edges.vertical[i] = out.points.size();
          out.points.push_back(make_point(field, i, j, c));
        }
      }
    }
  }

  // Marching squares over each 2x2 block of cell centers. Corner order is
  // counter-clockwise from bottom-left; edges are bottom, right, top, left.
  for (std::size_t row = 0; row + 1 < g.ny; ++row) {
    for (std::size_t col = 0; col + 1 < g.nx; ++col) {
      const std::array<std::size_t, 4> corner = {g.index(col, row), g.index(col + 1, row),
                                                 g.index(col + 1, row + 1),
                                                 g.index(col, row + 1)};
      bool all_in = true;
      for (auto k : corner) all_in = all_in && field.inside(k);
      if (!all_in) continue;

      const std::array<std::size_t, 4> edge = {
          edges.horizontal[corner[0]], edges.vertical[corner[1]], edges.horizontal[corner[3]],
          edges.vertical[corner[0]]};
      std::array<std::size_t, 4> hit{};
      std::size_t n_hit = 0;
      for (std::size_t e = 0; e < 4; ++e) {
        if (edge[e] != kNone) hit[n_hit++] = e;
      }
      if (n_hit == 2) {
        out.segments.push_back({edge[hit[0]], edge[hit[1]]});
      } else if (n_hit == 4) {
        // Saddle. The corner average decides whether the center is inside;
        // corners on the other side of the center get cut off.
        double avg = 0.0;
        for (auto k : corner) avg += field[k] - c;
        avg *= 0.25;
        const bool center_inside = avg >= 0.0;
        // corner k touches edges k (clockwise side) and (k + 3) % 4.
        for (std::size_t k = 0; k < 4; ++k) {
          const bool corner_inside = field[corner[k]] >= c;
          if (corner_inside != center_inside) {
            out.segments.push_back({edge[k], edge[(k + 3) % 4]});
          }
        }
      }
    }
  }
  return out;
}

RegionMask boundary_cells(const ScalarField& field, double c) {
  field.require_finite("boundary_cells");
  const GridGeometry& g = field.geometry();
  std::vector<std::uint8_t> touch(g.size(), 0);
  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      const std::size_t i = g.index(col, row);
      if (col + 1 < g.nx) {
        const std::size_t j = g.index(col + 1, row);
        if (crosses(field, i, j, c)) touch[i] = touch[j] = 1;
      }
      if (row + 1 < g.ny) {
        const std::size_t j = g.index(col, row + 1);
        if (crosses(field, i, j, c)) touch[i] = touch[j] = 1;
      }
    }
  }
  return RegionMask(g, std::move(touch));
}

std::vector<double> interpolate_on_contour(const ScalarField& field, const ContourSet& contour) {
  require_same_geometry(field.geometry(), contour.geometry, "interpolate_on_contour");
  std::vector<double> out;
  out.reserve(contour.points.size());
  for (const auto& p : contour.points) {
    // a + w1 (b - a) is exact when a == b.
    const double a = field[p.cells[0]];
    const double b = field[p.cells[1]];
    out.push_back(a + p.weights[1] * (b - a));
  }
  return out;
}

RegionMask dilate8(const RegionMask& mask) {
  const GridGeometry& g = mask.geometry();
  std::vector<std::uint8_t> out(g.size(), 0);
  for (std::size_t row = 0; row < g.ny; ++row) {
    for (std::size_t col = 0; col < g.nx; ++col) {
      if (!mask[g.index(col, row)]) continue;
      const std::size_t r0 = row == 0 ? 0 : row - 1;
      const std::size_t r1 = std::min(row + 1, g.ny - 1);
      const std::size_t c0 = col == 0 ? 0 : col - 1;
      const std::size_t c1 = std::min(col + 1, g.nx - 1);
      for (std::size_t r = r0; r <= r1; ++r) {
        for (std::size_t cc = c0; cc <= c1; ++cc) out[g.index(cc, r)] = 1;
      }
    }
  }
  return RegionMask(g, std::move(out));
}

}  // namespace cope
