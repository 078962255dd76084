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

// Minimal RFC 4180 reader/writer for report tables.

#ifndef XAMPLER_SRC_CSV_H_
#define XAMPLER_SRC_CSV_H_

#include <string>
#include <string_view>
#include <vector>

namespace xampler::internal {

using CsvRow = std::vector<std::string>;

// Parses `text` into rows. Lines that begin with '#' outside a quoted field
// are comments and skipped, as are blank lines. Throws Error(kFormat) on an
// unterminated quote.
std::vector<CsvRow> ParseCsv(std::string_view text);

// Quotes a field when it contains a comma, quote, CR or LF.
std::string CsvField(std::string_view field);

std::string CsvLine(const CsvRow &row);

}  // namespace xampler::internal

#endif  // XAMPLER_SRC_CSV_H_
