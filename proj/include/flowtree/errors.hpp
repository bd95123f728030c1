// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace flowtree {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or manifest; maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A referenced node, task, or artifact does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Breadth/depth bound violations on tree mutation.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Illegal node/task state transition.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario, response, or artifact document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Internal invariant failure (incomplete logs, broken traces);
/// maps to CLI exit code 2.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Network transport failure after retries were exhausted.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowtree
