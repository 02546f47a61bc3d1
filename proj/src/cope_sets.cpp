#include "cope/cope_sets.hpp"

#include "cope/errors.hpp"

namespace cope {

const char* to_string(BoundaryMode mode) {
  switch (mode) {
    case BoundaryMode::plugin: return "plugin";
    case BoundaryMode::plugin_cells: return "plugin-cells";
    case BoundaryMode::truth: return "true";
    case BoundaryMode::domain: return "domain";
  }
  return "unknown";
}

BoundaryMode parse_boundary_mode(const std::string& text) {
  if (text == "plugin") return BoundaryMode::plugin;
  if (text == "plugin-cells" || text == "cells") return BoundaryMode::plugin_cells;
  if (text == "true" || text == "truth") return BoundaryMode::truth;
  if (text == "domain") return BoundaryMode::domain;
  throw ValidationError("unknown boundary mode '" + text +
                        "' (expected plugin, plugin-cells, true or domain)");
}

namespace {

RegionMask band_of(const RegionMask& upper, const RegionMask& lower, const RegionMask& domain) {
  const RegionMask not_upper = domain.minus(upper);
  return lower.intersect(dilate8(not_upper));
}

}  // namespace

CopeResult cope_sets(const ScalarField& dev, const Threshold& a) {
  if (!(a.a >= 0.0)) throw ValidationError("cope_sets: threshold a must be non-negative");
  RegionMask upper = excursion_set(dev, a.a);
  RegionMask point = excursion_set(dev, 0.0);
  RegionMask lower = excursion_set(dev, -a.a);
  RegionMask band = band_of(upper, lower, dev.domain());
  return CopeResult{a,
                    std::move(upper),
                    std::move(point),
                    std::move(lower),
                    std::move(band),
                    0.0,
                    SupSample{},
                    CopeProvenance{}};
}

RegionMask contour_band(const CopeResult& result) { return result.band; }

InclusionReport verify_inclusion(const CopeResult& result, const RegionMask& truth) {
  require_same_geometry(result.upper.geometry(), truth.geometry(), "verify_inclusion");
  InclusionReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (result.upper[i] && !truth[i]) ++r.upper_violations;
    if (truth[i] && !result.lower[i]) ++r.lower_violations;
  }
  r.upper_ok = r.upper_violations == 0;
  r.lower_ok = r.lower_violations == 0;
  r.both_ok = r.upper_ok && r.lower_ok;
  return r;
}

CopeAnalysis estimate_cope_sets(const FieldStack& observations, const DesignSpec& design,
                                const CopeOptions& options) {
  FitResult fitted = fit(observations, design, options.fit);
  ScalarField dev = standardized_deviation(fitted, design, options.level);

  // Boundaries are traced on bhat_k restricted to cells with usable variance.
  const ScalarField& bk = fitted.bhat[design.coef_index()];
  const ScalarField target = bk.with_mask(std::vector<std::uint8_t>(
      fitted.normalized_residuals.mask().begin(), fitted.normalized_residuals.mask().end()));

  Region region = WholeDomain{};
  switch (options.boundary) {
    case BoundaryMode::plugin:
      region = extract_boundary(target, options.level);
      break;
    case BoundaryMode::plugin_cells:
      region = boundary_cells(target, options.level);
      break;
    case BoundaryMode::truth:
      if (!options.true_target) {
        throw ValidationError("boundary mode 'true' requires a known target field");
      }
      region = extract_boundary(*options.true_target, options.level);
      break;
    case BoundaryMode::domain:
      break;
  }

  SupSample sample = sup_distribution_blocked(fitted.normalized_residuals, region, options.M,
                                              options.seed, options.block, options.bootstrap);
  const Threshold a = threshold(sample, options.alpha);
  CopeResult result = cope_sets(dev, a);
  result.level_c = options.level;
  result.sup_sample = std::move(sample);
  result.config = CopeProvenance{options.seed,
                                 options.M,
                                 options.alpha,
                                 options.boundary,
                                 options.fit.floor == FloorPolicy::strict ? "strict" : "exclude",
                                 fitted.floored_count};
  if (fitted.floored_count > 0) {
    result.sup_sample.warnings.push_back(std::to_string(fitted.floored_count) +
                                         " cell(s) hit the sigma floor and were classified by sign only");
  }
  return CopeAnalysis{std::move(fitted), std::move(dev), std::move(result)};
}

}  // namespace cope
