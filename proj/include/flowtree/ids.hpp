// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace flowtree {

/// Identifier of a tree node; doubles as the task identifier for
/// research nodes submitted to the task pool. Allocated sequentially
/// per tree, so ids are stable and deterministic for a given run.
struct NodeId {
  std::uint64_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline std::string to_string(NodeId id) { return "n" + std::to_string(id.value); }

/// Stable 64-bit content hash (FNV-1a). Used for context/finding
/// identity; must not depend on std::hash, which varies by platform.
class Fnv1a {
 public:
  Fnv1a& add(std::string_view s) {
    for (unsigned char c : s) {
      hash_ ^= c;
      hash_ *= kPrime;
    }
    return *this;
  }

  Fnv1a& add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (i * 8)) & 0xffu;
      hash_ *= kPrime;
    }
    return *this;
  }

  std::uint64_t value() const { return hash_; }

 private:
  static constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t hash_ = 14695981039346656037ull;
};

struct ContentHash {
  std::uint64_t value = 0;

  friend auto operator<=>(const ContentHash&, const ContentHash&) = default;
};

std::string to_hex(ContentHash h);

inline ContentHash hash_content(std::string_view a, std::string_view b) {
  Fnv1a h;
  h.add(a).add("\x1f").add(b);
  return ContentHash{h.value()};
}

}  // namespace flowtree
