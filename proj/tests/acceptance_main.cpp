/// Runs every acceptance criterion on the default configuration and prints
/// one PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>

#include "carlab/cli/checks.hpp"

int main() {
  using namespace carlab::cli;
  const Config config = default_config();
  int failed = 0;
  for (int k = 1; k <= 11; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const CheckResult r = run_check(k, config);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2d (%s): %s [%.1fs]\n", r.pass ? "PASS" : "FAIL", k, r.name.c_str(),
                r.detail.c_str(), secs);
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d of 11 criteria passed\n", 11 - failed);
  return failed == 0 ? 0 : 1;
}
