#pragma once

// Quick invariant suite behind the `selftest` command.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cope {

struct SelftestCheck {
  std::string name;
  bool passed{false};
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;

  std::size_t passed() const;
  bool ok() const { return passed() == checks.size(); }
};

SelftestReport run_selftest(std::uint64_t seed = 1);

}  // namespace cope
