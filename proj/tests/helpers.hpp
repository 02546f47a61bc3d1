#pragma once

#include <cstdint>
#include <vector>

#include "cope/grid.hpp"
#include "cope/rng.hpp"

namespace testing {

inline cope::ScalarField random_field(const cope::GridGeometry& g, std::uint64_t seed,
                                      std::uint64_t sub, double sd = 1.0) {
  cope::KeyedStream rng(seed, cope::StreamTag::test, sub);
  std::vector<double> v(g.size());
  for (auto& x : v) x = sd * rng.normal();
  return cope::ScalarField(g, std::move(v));
}

inline cope::FieldStack random_stack(const cope::GridGeometry& g, std::size_t n, std::uint64_t seed,
                                     std::uint64_t sub) {
  cope::KeyedStream rng(seed, cope::StreamTag::test, sub);
  std::vector<double> data(n * g.size());
  for (auto& x : data) x = rng.normal();
  return cope::FieldStack(g, n, std::move(data));
}

}  // namespace testing
