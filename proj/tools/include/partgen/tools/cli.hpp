// Copyright 2026 The PartGen Authors
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

#pragma once

#include <ostream>

namespace partgen::tools {

/// Entry point of the `partgen` executable. Results go to `out` as one JSON
/// document; logs and the machine-readable error line go to `err`.
/// Exit codes: 0 success, 1 failure, 2 usage or config error, 3 metric not
/// applicable, 4 missing input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace partgen::tools
