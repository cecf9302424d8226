#pragma once

#include <string>
#include <vector>

namespace torvm {

struct SelftestCase {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it is compared against
  std::string detail;
};

// Fast invariant checks on coarse grids (seconds in total).
std::vector<SelftestCase> run_selftest(unsigned long long seed = 1);

}  // namespace torvm
