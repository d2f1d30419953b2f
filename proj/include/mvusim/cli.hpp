// Copyright 2026 The mvusim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvusim {

// Exit codes: 0 success, 1 verification mismatch, 2 any other error.
// Errors are reported on `err` as "ERROR <code>: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "W/A", e.g. "2/4" -> {2, 4}. Throws OutOfRange.
std::pair<int, int> parse_precision_pair(const std::string& text);

}  // namespace mvusim
