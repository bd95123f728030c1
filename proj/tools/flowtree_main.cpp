// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include "flowtree/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 1 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return flowtree::run_cli(args);
}
