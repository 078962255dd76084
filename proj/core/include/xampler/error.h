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

#ifndef XAMPLER_ERROR_H_
#define XAMPLER_ERROR_H_

#include <stdexcept>
#include <string>

namespace xampler {

// Error categories. The CLI maps kInvalidInput and kFormat to exit code 1
// and everything else to exit code 2.
enum class ErrorCode {
  kInvalidInput,  // bad arguments, config or dataset contents
  kFormat,        // corrupt or unrecognized file
  kIo,
  kProtocol,      // scorer/bridge answered something we cannot use
  kTransport,     // scorer/bridge unreachable or 5xx after retries
  kNumerical,     // non-finite values, degenerate vectors
};

const char *ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xampler

#endif  // XAMPLER_ERROR_H_
