#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace critwalk::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  /// Measured values; deterministic for a fixed seed.
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  /// Empty: all criteria.
  std::vector<int> only;
  std::uint64_t seed = 20261016;
  unsigned threads = 1;
  /// Called as each criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
};

inline constexpr int kCriterionCount = 15;

std::string title(int id);
std::vector<CriterionResult> run(const Options& opts);

/// "[PASS] 3 Feller asymptotics: ..." style line.
std::string format_line(const CriterionResult& r, bool with_time = true);

}  // namespace critwalk::acceptance
