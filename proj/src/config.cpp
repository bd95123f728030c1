// SPDX-License-Identifier: Apache-2.0
#include "flowtree/config.hpp"

#include <string>

#include "flowtree/errors.hpp"

namespace flowtree {

namespace {

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

void TreeConfig::validate() const {
  if (max_depth < 1) throw ConfigError("max_depth must be positive");
  if (max_breadth < 1) throw ConfigError("max_breadth must be positive");
  if (flex_breadth < 0) throw ConfigError("flex_breadth must be nonnegative");
  check_fraction(phi_min, "phi_min");
  check_fraction(psi_min, "psi_min");
  check_fraction(tau, "tau");
  if (eval_interval <= Duration::zero()) throw ConfigError("eval_interval must be positive");
  if (t_max < Duration::zero()) throw ConfigError("t_max must be nonnegative");
  if (worker_limit < 0) throw ConfigError("worker_limit must be nonnegative (0 = unlimited)");
}

}  // namespace flowtree
