// Copyright 2026 The Xampler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XAMPLER_TOOLS_CLI_H_
#define XAMPLER_TOOLS_CLI_H_

#include <iosfwd>

namespace xampler::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeError = 2;

// Entry point of the `xampler` binary. Normal output goes to `out`,
// diagnostics and usage on errors to `err`.
int Run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace xampler::cli

#endif  // XAMPLER_TOOLS_CLI_H_
