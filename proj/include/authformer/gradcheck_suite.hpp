#pragma once

// Named finite-difference targets covering every primitive and the composed
// model blocks, evaluated in double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace authformer {

struct GradcheckOptions {
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  double tolerance = 1e-4;
  /// Adds a target whose backward rule is deliberately wrong.
  bool inject_fault = false;
  /// Restricts the run to targets whose name contains this substring.
  std::string filter;
};

struct GradcheckResult {
  std::string target;
  double max_relative_error = 0;
  double seconds = 0;
  bool passed = false;
};

/// Names of all targets, in run order (the fault target excluded).
std::vector<std::string> gradcheck_targets();

/// Runs every selected target over `seeds` seeds and keeps the worst error.
/// `on_result` fires after each target.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options,
                                           const std::function<void(const GradcheckResult&)>& on_result = {});

}  // namespace authformer
