// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gce {

/// Raised when an input (spec, profile, CSV, CLI argument) violates its
/// contract. The CLI maps it to exit status 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace gce
