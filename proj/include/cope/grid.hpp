#pragma once

// Regular 2-D lattices, scalar fields on them, cell masks, and level-set
// extraction. Cells are addressed row-major: index = row * nx + col, with
// col running along x and row along y.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cope {

struct GridGeometry {
  std::size_t nx{2};
  std::size_t ny{2};
  double spacing_x{1.0};
  double spacing_y{1.0};
  double origin_x{0.0};  // x of the center of cell (0, 0)
  double origin_y{0.0};

  // Validates nx, ny >= 2 and strictly positive spacings.
  static GridGeometry make(std::size_t nx, std::size_t ny, double spacing_x = 1.0,
                           double spacing_y = 1.0, double origin_x = 0.0,
                           double origin_y = 0.0);

  std::size_t size() const { return nx * ny; }
  std::size_t index(std::size_t col, std::size_t row) const { return row * nx + col; }
  std::size_t col_of(std::size_t i) const { return i % nx; }
  std::size_t row_of(std::size_t i) const { return i / nx; }
  double x(std::size_t col) const { return origin_x + spacing_x * static_cast<double>(col); }
  double y(std::size_t row) const { return origin_y + spacing_y * static_cast<double>(row); }

  bool operator==(const GridGeometry&) const = default;
};

// Throws GeometryError when the two geometries differ.
void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const char* context);

class RegionMask {
 public:
  explicit RegionMask(const GridGeometry& geometry);  // all cells outside
  RegionMask(const GridGeometry& geometry, std::vector<std::uint8_t> inside);

  static RegionMask full(const GridGeometry& geometry);

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return inside_.size(); }
  bool operator[](std::size_t i) const { return inside_[i] != 0; }
  std::span<const std::uint8_t> cells() const { return inside_; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  bool subset_of(const RegionMask& other) const;
  RegionMask intersect(const RegionMask& other) const;
  RegionMask unite(const RegionMask& other) const;
  RegionMask minus(const RegionMask& other) const;
  RegionMask complement() const;

  bool operator==(const RegionMask& other) const;

 private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> inside_;
};

// One real value per cell plus an optional validity mask (true = inside the
// domain S). Immutable after construction.
class ScalarField {
 public:
  ScalarField(const GridGeometry& geometry, std::vector<double> values,
              std::vector<std::uint8_t> mask = {});

  static ScalarField constant(const GridGeometry& geometry, double value);

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(std::size_t col, std::size_t row) const { return values_[geometry_.index(col, row)]; }

  bool has_mask() const { return !mask_.empty(); }
  bool inside(std::size_t i) const { return mask_.empty() || mask_[i] != 0; }
  // Empty span when no mask was supplied.
  std::span<const std::uint8_t> mask() const { return mask_; }
  RegionMask domain() const;

  // Throws InvalidFieldError if a masked-in value is NaN or infinite.
  void require_finite(const char* context) const;

  ScalarField with_mask(std::vector<std::uint8_t> mask) const;

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

// n co-registered fields stored layer-major: layer j occupies
// data[j * L, (j + 1) * L).
class FieldStack {
 public:
  FieldStack(const GridGeometry& geometry, std::size_t n_layers, std::vector<double> data,
             std::vector<std::uint8_t> mask = {});

  static FieldStack from_layers(const std::vector<ScalarField>& layers);

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t layers() const { return n_layers_; }
  std::size_t cells() const { return geometry_.size(); }
  std::span<const double> layer(std::size_t j) const {
    return {data_.data() + j * cells(), cells()};
  }
  double value(std::size_t j, std::size_t i) const { return data_[j * cells() + i]; }
  std::span<const double> data() const { return data_; }

  bool has_mask() const { return !mask_.empty(); }
  bool inside(std::size_t i) const { return mask_.empty() || mask_[i] != 0; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  RegionMask domain() const;

  ScalarField layer_field(std::size_t j) const;

 private:
  GridGeometry geometry_;
  std::size_t n_layers_;
  std::vector<double> data_;
  std::vector<std::uint8_t> mask_;
};

struct ContourPoint {
  double x{0.0};
  double y{0.0};
  // The two cell centers flanking the crossed edge and the linear
  // interpolation weights on them (non-negative, summing to one).
  std::array<std::size_t, 2> cells{0, 0};
  std::array<double, 2> weights{1.0, 0.0};
};

struct ContourSegment {
  std::size_t from{0};
  std::size_t to{0};
};

// Plug-in boundary of {field >= level}: one point per sign-changing edge of
// the cell-center lattice, plus the marching-squares segments joining them.
struct ContourSet {
  GridGeometry geometry;
  double level{0.0};
  std::vector<ContourPoint> points;
  std::vector<ContourSegment> segments;

  bool empty() const { return points.empty(); }
};

// {i : values[i] >= c and i inside the field's mask}.
RegionMask excursion_set(const ScalarField& field, double c);

ContourSet extract_boundary(const ScalarField& field, double c);

// Masked-in cells touching at least one sign-changing edge. Alternate
// discretization of the boundary used for sensitivity checks.
RegionMask boundary_cells(const ScalarField& field, double c);

std::vector<double> interpolate_on_contour(const ScalarField& field, const ContourSet& contour);

// Closed 8-neighbourhood dilation.
RegionMask dilate8(const RegionMask& mask);

}  // namespace cope
