// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flowtree/time.hpp"

namespace flowtree {

/// Structural and policy limits for one research run.
///
/// Defaults: depth cap 10, breadth cap 4 with flex up to 6 total,
/// satisfaction/quality thresholds 0.8, monitor cadence 8s.
struct TreeConfig {
  int max_depth = 10;
  int max_breadth = 4;
  int flex_breadth = 2;
  double phi_min = 0.8;   // goal-satisfaction threshold
  double psi_min = 0.8;   // quality threshold
  double tau = 0.1;       // diminishing-returns threshold for deepening
  Duration eval_interval = seconds(8);
  Duration t_max = seconds(120);
  int worker_limit = 0;   // 0 = unlimited

  int max_total_breadth() const { return max_breadth + flex_breadth; }

  /// Throws ConfigError if any field is out of range.
  void validate() const;
};

}  // namespace flowtree
