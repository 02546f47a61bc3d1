#pragma once

// Nested confidence sets for an excursion set {b_k >= c}:
//   upper = {dev >= +a},  point_estimate = {dev >= 0},  lower = {dev >= -a},
// where dev is the standardized deviation field. For every a >= 0,
// upper is a subset of point_estimate, which is a subset of lower.

#include <cstdint>
#include <optional>
#include <string>

#include "cope/bootstrap.hpp"
#include "cope/glm.hpp"
#include "cope/grid.hpp"

namespace cope {

// Which region the bootstrap supremum is taken over.
enum class BoundaryMode {
  plugin,        // interpolated contour of bhat_k at level c
  plugin_cells,  // cells adjacent to a crossing of bhat_k at level c
  truth,         // interpolated contour of a known target (simulation only)
  domain,        // every masked-in cell
};

const char* to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(const std::string& text);

struct CopeProvenance {
  std::uint64_t seed{0};
  std::size_t M{0};
  double alpha{0.0};
  BoundaryMode boundary{BoundaryMode::plugin};
  std::string sigma_policy{"exclude"};
  std::size_t floored_cells{0};
};

struct CopeResult {
  Threshold a;
  RegionMask upper;
  RegionMask point_estimate;
  RegionMask lower;
  RegionMask band;
  double level_c{0.0};
  SupSample sup_sample;
  CopeProvenance config;
};

CopeResult cope_sets(const ScalarField& dev, const Threshold& a);

// Grid analogue of cl(lower \ upper): cells of `lower` lying in the closed
// 8-neighbourhood of some masked-in cell not in `upper`.
RegionMask contour_band(const CopeResult& result);

struct InclusionReport {
  bool upper_ok{false};  // upper is a subset of truth
  bool lower_ok{false};  // truth is a subset of lower
  bool both_ok{false};
  std::size_t upper_violations{0};
  std::size_t lower_violations{0};
};

InclusionReport verify_inclusion(const CopeResult& result, const RegionMask& truth);

struct CopeOptions {
  double level{0.0};
  double alpha{0.1};
  std::size_t M{1000};
  std::uint64_t seed{0};
  BoundaryMode boundary{BoundaryMode::plugin};
  FitOptions fit{};
  BootstrapOptions bootstrap{};
  std::size_t block{64};
  // Needed only for BoundaryMode::truth.
  std::optional<ScalarField> true_target;
};

struct CopeAnalysis {
  FitResult fit;
  ScalarField deviation;
  CopeResult cope;
};

// Full pipeline for coefficient design.coef_index(): per-cell fit,
// normalized residuals, bootstrap threshold over the chosen boundary, and
// the nested sets.
CopeAnalysis estimate_cope_sets(const FieldStack& observations, const DesignSpec& design,
                                const CopeOptions& options);

}  // namespace cope
