#include "cope/bootstrap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "cope/errors.hpp"
#include "cope/rng.hpp"

namespace cope {

const char* to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::contour: return "contour";
    case RegionKind::whole_domain: return "whole-domain";
    case RegionKind::cell_mask: return "cell-mask";
  }
  return "unknown";
}

std::vector<double> bootstrap_multipliers(std::uint64_t seed, std::uint64_t replicate,
                                          std::size_t n) {
  KeyedStream rng(seed, StreamTag::multipliers, replicate);
  std::vector<double> g(n);
  for (auto& x : g) x = rng.normal();
  return g;
}

ScalarField bootstrap_realization(const FieldStack& residuals, std::span<const double> g) {
  const std::size_t n = residuals.layers();
  if (g.size() != n) {
    throw ValidationError("bootstrap_realization: " + std::to_string(g.size()) +
                          " multipliers for " + std::to_string(n) + " residual layers");
  }
  const std::size_t L = residuals.cells();
  std::vector<double> out(L, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto r = residuals.layer(j);
    for (std::size_t i = 0; i < L; ++i) out[i] += g[j] * r[i];
  }
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < L; ++i) out[i] = residuals.inside(i) ? out[i] * inv_sqrt_n : 0.0;
  return ScalarField(residuals.geometry(), std::move(out),
                     std::vector<std::uint8_t>(residuals.mask().begin(), residuals.mask().end()));
}

double sample_covariance(const FieldStack& residuals, std::size_t s1, std::size_t s2) {
  const std::size_t L = residuals.cells();
  if (s1 >= L || s2 >= L) throw ValidationError("sample_covariance: cell index out of range");
  if (!residuals.inside(s1) || !residuals.inside(s2)) {
    throw ValidationError("sample_covariance: cell is outside the domain");
  }
  const std::size_t n = residuals.layers();
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += residuals.value(j, s1) * residuals.value(j, s2);
  return acc / static_cast<double>(n);
}

namespace {

// Residuals restricted to the cells the supremum needs, stored layer-major
// and contiguous, plus the contour stencil expressed in compact indices.
struct PreparedRegion {
  RegionKind kind{RegionKind::whole_domain};
  std::size_t n{0};
  std::size_t cells{0};
  std::vector<double> E;  // n x cells
  std::vector<std::array<std::size_t, 2>> point_cells;
  std::vector<std::array<double, 2>> point_weights;
  bool fell_back{false};
  std::vector<std::string> warnings;

  bool contour() const { return kind == RegionKind::contour; }
  std::size_t size() const { return contour() ? point_cells.size() : cells; }
};

void gather(PreparedRegion& pr, const FieldStack& R, const std::vector<std::size_t>& idx) {
  pr.n = R.layers();
  pr.cells = idx.size();
  pr.E.resize(pr.n * pr.cells);
  for (std::size_t j = 0; j < pr.n; ++j) {
    const auto layer = R.layer(j);
    double* dst = pr.E.data() + j * pr.cells;
    for (std::size_t c = 0; c < idx.size(); ++c) dst[c] = layer[idx[c]];
  }
}

std::vector<std::size_t> domain_cells(const FieldStack& R) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < R.cells(); ++i) {
    if (R.inside(i)) idx.push_back(i);
  }
  return idx;
}

PreparedRegion prepare(const FieldStack& R, const Region& region, const BootstrapOptions& opt) {
  PreparedRegion pr;
  std::vector<std::size_t> idx;

  if (const auto* contour = std::get_if<ContourSet>(&region)) {
    require_same_geometry(R.geometry(), contour->geometry, "sup_distribution");
    pr.kind = RegionKind::contour;
    std::vector<std::size_t> compact(R.cells(), static_cast<std::size_t>(-1));
    auto slot = [&](std::size_t cell) {
      if (compact[cell] == static_cast<std::size_t>(-1)) {
        compact[cell] = idx.size();
        idx.push_back(cell);
      }
      return compact[cell];
    };
    for (const auto& p : contour->points) {
      const bool use0 = p.weights[0] > 0.0;
      const bool use1 = p.weights[1] > 0.0;
      if ((use0 && !R.inside(p.cells[0])) || (use1 && !R.inside(p.cells[1]))) continue;
      const std::size_t c0 = use0 ? p.cells[0] : p.cells[1];
      const std::size_t c1 = use1 ? p.cells[1] : p.cells[0];
      pr.point_cells.push_back({slot(c0), slot(c1)});
      pr.point_weights.push_back(p.weights);
    }
    if (pr.point_cells.size() < contour->points.size()) {
      pr.warnings.push_back(std::to_string(contour->points.size() - pr.point_cells.size()) +
                            " contour point(s) touch excluded cells and were dropped");
    }
  } else if (const auto* mask = std::get_if<RegionMask>(&region)) {
    require_same_geometry(R.geometry(), mask->geometry(), "sup_distribution");
    pr.kind = RegionKind::cell_mask;
    for (std::size_t i = 0; i < R.cells(); ++i) {
      if ((*mask)[i] && R.inside(i)) idx.push_back(i);
    }
  } else {
    pr.kind = RegionKind::whole_domain;
    idx = domain_cells(R);
  }

  const std::size_t requested = pr.contour() ? pr.point_cells.size() : idx.size();
  if (requested == 0 && pr.kind != RegionKind::whole_domain) {
    if (!opt.fallback_to_domain) {
      throw EmptyBoundaryError("bootstrap region is empty and the whole-domain fallback is disabled");
    }
    pr.warnings.push_back("bootstrap region is empty; falling back to the supremum over the whole domain");
    pr.fell_back = true;
    pr.kind = RegionKind::whole_domain;
    pr.point_cells.clear();
    pr.point_weights.clear();
    idx = domain_cells(R);
  }
  gather(pr, R, idx);
  if (pr.size() == 0) {
    pr.warnings.push_back("domain has no usable cells; all suprema are zero");
  }
  return pr;
}

double region_sup(const PreparedRegion& pr, const double* G) {
  double sup = 0.0;
  if (pr.contour()) {
    for (std::size_t k = 0; k < pr.point_cells.size(); ++k) {
      const auto& c = pr.point_cells[k];
      const auto& w = pr.point_weights[k];
      sup = std::max(sup, std::fabs(w[0] * G[c[0]] + w[1] * G[c[1]]));
    }
  } else {
    for (std::size_t i = 0; i < pr.cells; ++i) sup = std::max(sup, std::fabs(G[i]));
  }
  return sup;
}

SupSample make_sample(const FieldStack& R, const PreparedRegion& pr, std::size_t M,
                      std::uint64_t seed) {
  if (M == 0) throw ValidationError("bootstrap replicate count M must be at least 1");
  SupSample s;
  s.M = M;
  s.seed = seed;
  s.region = pr.kind;
  s.region_size = pr.size();
  s.residual_fingerprint = fingerprint(R);
  s.fell_back = pr.fell_back;
  s.warnings = pr.warnings;
  if (M < 100) {
    s.warnings.push_back("M = " + std::to_string(M) + " replicates is below the recommended 100");
  }
  s.values.assign(M, 0.0);
  return s;
}

// Adds sum_j g_k[j] * E[j, lo:hi] into K accumulator rows, j ascending, so
// each output element sees exactly the same operation sequence as the
// one-replicate reference loop.
template <std::size_t K>
void accumulate(const PreparedRegion& pr, const std::array<const double*, K>& g,
                const std::array<double*, K>& acc, std::size_t lo, std::size_t hi) {
  for (std::size_t j = 0; j < pr.n; ++j) {
    const double* e = pr.E.data() + j * pr.cells;
    std::array<double, K> gj;
    for (std::size_t k = 0; k < K; ++k) gj[k] = g[k][j];
    for (std::size_t i = lo; i < hi; ++i) {
      const double ei = e[i];
      for (std::size_t k = 0; k < K; ++k) acc[k][i] += gj[k] * ei;
    }
  }
}

constexpr std::size_t kTile = 256;
constexpr std::size_t kGroup = 4;

}  // namespace

SupSample sup_distribution(const FieldStack& residuals, const Region& region, std::size_t M,
                           std::uint64_t seed, const BootstrapOptions& options) {
  const PreparedRegion pr = prepare(residuals, region, options);
  SupSample s = make_sample(residuals, pr, M, seed);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(pr.n));

#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t m = 0; m < M; ++m) {
    const std::vector<double> g = bootstrap_multipliers(seed, m, pr.n);
    std::vector<double> G(pr.cells);
    for (std::size_t i = 0; i < pr.cells; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < pr.n; ++j) acc += g[j] * pr.E[j * pr.cells + i];
      G[i] = acc * inv_sqrt_n;
    }
    s.values[m] = region_sup(pr, G.data());
  }
  return s;
}

SupSample sup_distribution_blocked(const FieldStack& residuals, const Region& region,
                                   std::size_t M, std::uint64_t seed, std::size_t block,
                                   const BootstrapOptions& options) {
  if (block == 0) throw ValidationError("bootstrap block size must be at least 1");
  const PreparedRegion pr = prepare(residuals, region, options);
  SupSample s = make_sample(residuals, pr, M, seed);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(pr.n));
  const std::size_t n_blocks = (M + block - 1) / block;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t m0 = b * block;
    const std::size_t nb = std::min(block, M - m0);

    // V: n x nb multipliers (stored per replicate), G: region x nb.
    std::vector<std::vector<double>> V(nb);
    for (std::size_t k = 0; k < nb; ++k) V[k] = bootstrap_multipliers(seed, m0 + k, pr.n);
    std::vector<double> G(nb * pr.cells, 0.0);

    for (std::size_t lo = 0; lo < pr.cells; lo += kTile) {
      const std::size_t hi = std::min(pr.cells, lo + kTile);
      std::size_t k = 0;
      for (; k + kGroup <= nb; k += kGroup) {
        std::array<const double*, kGroup> g;
        std::array<double*, kGroup> acc;
        for (std::size_t q = 0; q < kGroup; ++q) {
          g[q] = V[k + q].data();
          acc[q] = G.data() + (k + q) * pr.cells;
        }
        accumulate<kGroup>(pr, g, acc, lo, hi);
      }
      for (; k < nb; ++k) {
        accumulate<1>(pr, {V[k].data()}, {G.data() + k * pr.cells}, lo, hi);
      }
    }
    for (std::size_t k = 0; k < nb; ++k) {
      double* Gk = G.data() + k * pr.cells;
      for (std::size_t i = 0; i < pr.cells; ++i) Gk[i] *= inv_sqrt_n;
      s.values[m0 + k] = region_sup(pr, Gk);
    }
  }
  return s;
}

Threshold threshold(const SupSample& sample, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie strictly between 0 and 1");
  }
  const std::size_t M = sample.values.size();
  if (M == 0) throw ValidationError("threshold: empty supremum sample");
  std::vector<double> sorted = sample.values;
  std::sort(sorted.begin(), sorted.end());
  // The small slack absorbs representation error in (1 - alpha) * M.
  const double target = (1.0 - alpha) * static_cast<double>(M);
  auto k = static_cast<std::size_t>(std::ceil(target - 1e-9));
  k = std::clamp<std::size_t>(k, 1, M);
  return Threshold{sorted[k - 1], alpha, k};
}

std::uint64_t fingerprint(const FieldStack& stack) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const auto d = stack.data();
  feed(d.data(), d.size() * sizeof(double));
  const auto m = stack.mask();
  feed(m.data(), m.size());
  return h;
}

}  // namespace cope
