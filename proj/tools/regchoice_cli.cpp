/* Copyright 2026 The regchoice Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "regchoice/harness.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << regchoice::usage();
    return 2;
  }
  const std::string command = argv[1];
  if (command == "-h" || command == "--help") {
    std::cout << regchoice::usage();
    return 0;
  }
  if (command == "--version") {
    std::cout << regchoice::version() << '\n';
    return 0;
  }

  regchoice::CliOptions options;
  CLI::App app{"regchoice " + command};
  app.add_option("--config", options.config, "Run configuration (JSON)");
  app.add_option("--out", options.out, "Output directory");
  int workers = 0;
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Overrides train.seed");
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*workers_opt) options.workers = workers;
  if (*seed_opt) options.seed = seed;
  return regchoice::run(command, options, std::cout, std::cerr);
}
