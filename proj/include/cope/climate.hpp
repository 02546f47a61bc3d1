#pragma once

// Two-period trend regression for gridded climate stacks, the flat binary
// stack format with its covariate sidecar, and a synthetic surrogate with a
// known mean-difference field.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cope/cope_sets.hpp"
#include "cope/glm.hpp"
#include "cope/grid.hpp"

namespace cope {

// Y = (T_b - T_a) 1_b + T_a + m_a t 1_a + m_b t 1_b + e with the first n_a
// rows in period a. Coefficients in column order:
//   0: T_b - T_a   1: T_a   2: m_a   3: m_b
struct TwoPeriodDesign {
  std::size_t n_a{0};
  std::size_t n_b{0};
  std::vector<double> t_a;  // centered
  std::vector<double> t_b;
  double shift_a{0.0};      // subtracted from the supplied times
  double shift_b{0.0};
  DesignSpec design;
};

// Times are centered within each period; a non-zero shift is reported in
// shift_a / shift_b. Throws ValidationError if a period has fewer than two
// layers and DesignError if the times are constant within a period.
TwoPeriodDesign build_two_period_design(std::span<const double> t_a, std::span<const double> t_b);

// Flat little-endian stack file, 56-byte header:
//   0  char[4] "COPE"      4  u32 version (1)
//   8  u32 nx             12  u32 ny            16  u32 n_layers
//  20  u8 value type (1 = float64)  21  u8 row-major flag  22  u16 reserved
//  24  f64 origin_x  32  f64 origin_y  40  f64 spacing_x  48  f64 spacing_y
// followed by n_layers grids of nx * ny float64 values. Cells holding a
// non-finite value in any layer are read back as masked out.
void write_grid_stack(const std::string& path, const FieldStack& stack);
FieldStack read_grid_stack(const std::string& path);

struct LayerCovariate {
  std::size_t layer{0};
  char period{'a'};  // 'a' or 'b'
  double time{0.0};
};

// CSV sidecar with header layer_index,period,time.
void write_covariates(const std::string& path, const std::vector<LayerCovariate>& rows);
std::vector<LayerCovariate> read_covariates(const std::string& path);

struct AnalyzeConfig {
  double level{2.0};
  double alpha{0.1};
  std::size_t M{1000};
  std::uint64_t seed{0};
  BoundaryMode boundary{BoundaryMode::plugin};
  FitOptions fit{};
};

struct AnalyzeOutput {
  TwoPeriodDesign design;
  CopeAnalysis analysis;
  std::vector<std::string> notices;
};

// Reorders the layers period a first (by layer index within a period),
// builds the two-period design and runs the CoPE pipeline on T_b - T_a.
AnalyzeOutput analyze(const FieldStack& stack, const std::vector<LayerCovariate>& covariates,
                      const AnalyzeConfig& config);

struct SurrogateSpec {
  std::size_t nx{120};
  std::size_t ny{80};
  std::size_t n_a{29};
  std::size_t n_b{29};
  double delta{2.5};         // T_b - T_a inside the disk, 0 outside
  double disk_radius{8.0};   // degrees
  double noise_sd{0.4};
  double noise_bandwidth{1.5};
  std::uint64_t seed{1};
};

struct Surrogate {
  FieldStack stack;
  std::vector<LayerCovariate> covariates;
  ScalarField true_difference;
};

// Longitude/latitude-like grid (0.5 degree spacing) with a smooth
// climatology, per-period linear trends, smoothed Gaussian noise and a disk
// of warming. Times are raw years, so analyze() has to center them.
Surrogate make_surrogate(const SurrogateSpec& spec);

}  // namespace cope
