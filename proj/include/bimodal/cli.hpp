// Copyright 2026 The Bimodal Stereo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

namespace bimodal {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitConfig = 2,
  kExitRegistration = 3,
};

/// Parses `argv` (argv[0] is the program name) and runs one subcommand:
/// synth, render, sfs, integrate, register, refine, run, eval or sweep.
/// Every subcommand that writes files puts them under --out together with
/// manifest.json.
int cli_dispatch(int argc, const char* const* argv);
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace bimodal
