// SPDX-License-Identifier: Apache-2.0
#include "flowtree/ids.hpp"

namespace flowtree {

std::string to_hex(ContentHash h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  auto v = h.value;
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace flowtree
