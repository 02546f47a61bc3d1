#pragma once

// Gaussian multiplier bootstrap for the law of sup |G~| over a region,
//   G~(s) = n^{-1/2} sum_j g_j R_j(s),   g_j iid N(0, 1),
// conditional on the (normalized) residual fields R_j.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cope/grid.hpp"

namespace cope {

struct WholeDomain {};

// Where the supremum is taken: along an interpolated contour, over a set of
// cells, or over every masked-in cell of the residual stack.
using Region = std::variant<ContourSet, RegionMask, WholeDomain>;

enum class RegionKind { contour, whole_domain, cell_mask };

const char* to_string(RegionKind kind);

struct SupSample {
  std::vector<double> values;  // one supremum per replicate, in replicate order
  std::size_t M{0};
  std::uint64_t seed{0};
  RegionKind region{RegionKind::whole_domain};
  std::size_t region_size{0};  // contour points or cells actually used
  std::uint64_t residual_fingerprint{0};
  bool fell_back{false};       // empty region replaced by the whole domain
  std::vector<std::string> warnings;
};

struct Threshold {
  double a{0.0};
  double alpha{0.1};
  std::size_t order_index{0};  // 1-based rank of a in the sorted sample
};

struct BootstrapOptions {
  // Replace an empty region by the whole domain (with a warning) instead of
  // throwing EmptyBoundaryError.
  bool fallback_to_domain = true;
};

// The n multipliers of replicate m: keyed by (seed, m) only.
std::vector<double> bootstrap_multipliers(std::uint64_t seed, std::uint64_t replicate,
                                          std::size_t n);

ScalarField bootstrap_realization(const FieldStack& residuals, std::span<const double> multipliers);

// n^{-1} sum_j R_j(s1) R_j(s2).
double sample_covariance(const FieldStack& residuals, std::size_t s1, std::size_t s2);

// Reference implementation: one replicate at a time.
SupSample sup_distribution(const FieldStack& residuals, const Region& region, std::size_t M,
                           std::uint64_t seed, const BootstrapOptions& options = {});

// Same suprema, bit for bit, computed as blocked (region x n)(n x block)
// products with cache tiling.
SupSample sup_distribution_blocked(const FieldStack& residuals, const Region& region,
                                   std::size_t M, std::uint64_t seed, std::size_t block,
                                   const BootstrapOptions& options = {});

// a = the ceil((1 - alpha) M)-th smallest supremum.
Threshold threshold(const SupSample& sample, double alpha);

// FNV-1a over the raw bytes of the stack values and mask.
std::uint64_t fingerprint(const FieldStack& stack);

}  // namespace cope
