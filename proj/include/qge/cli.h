/*
 * Copyright 2026 The QGE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef QGE_CLI_H_
#define QGE_CLI_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "qge/error.h"

namespace qge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDegenerate = 4;

int ExitCodeFor(ErrorCode code);

// A parsed command line. `config` is the raw JSON document.
struct Invocation {
  std::string command;
  nlohmann::json config;
  std::string config_dir = ".";  // relative data paths resolve against it
  int threads = 0;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

// Fills defaults, applies overrides and validates every field. Unknown keys
// and type mismatches throw kConfigError naming the field path. Section
// seeds left null are derived from the master seed.
nlohmann::json ResolveConfig(const nlohmann::json& raw,
                             std::optional<std::uint64_t> seed_override,
                             const std::optional<std::string>& out_override);

// FNV-1a over the canonical dump of the resolved config without its output
// section, as 16 hex digits.
std::string ConfigHash(const nlohmann::json& resolved);

std::uint64_t Fnv1a64(std::string_view bytes);

// Runs one subcommand; writes config.json, results.csv and summary.json into
// the output directory. Returns an exit code; errors are reported on `log`.
int Execute(const Invocation& invocation, std::ostream& log);

// Entry point shared by the executable and in-process tests.
int RunCli(int argc, const char* const* argv, std::ostream& log);

}  // namespace qge::cli

#endif  // QGE_CLI_H_
