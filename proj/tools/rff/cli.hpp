// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rff::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kReject = 1,  // fingerprint: confidence below threshold
  kUsage = 2,
  kFormat = 3,
  kConfig = 4,
  kIo = 5,
  kInternal = 6,
};

// Runs one `rff` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rff::cli
