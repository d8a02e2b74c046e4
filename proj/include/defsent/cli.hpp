// Copyright 2026 The DefSent Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace defsent::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInternalError = 1,
  kMissingInput = 2,
  kConfigError = 3,
  kInsufficientData = 4,
  kMalformedTask = 5,
  kBadCheckpoint = 6,
};

// Runs one command line (argv without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "3", "1,2,5" or "1..10".
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

// Worker cap: DEFSENT_THREADS when set, hardware concurrency otherwise.
std::size_t thread_cap();

}  // namespace defsent::cli
