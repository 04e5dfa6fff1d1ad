// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ttcnet {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes / axes.
struct DimensionError : Error { using Error::Error; };

/// Invalid configuration value or combination (window sizes, stage counts, ...).
struct ConfigError : Error { using Error::Error; };

/// API misuse: wrong call order, backward on a consumed tape, non-scalar loss.
struct UsageError : Error { using Error::Error; };

/// Malformed runtime input: bad clip tensors, bad manifests, degenerate series.
struct InputError : Error { using Error::Error; };

/// Invalid generator / scene parameters.
struct ParamError : Error { using Error::Error; };

/// File-format or filesystem failure.
struct IoError : Error { using Error::Error; };

/// Checkpoint cannot be applied: config or tensor-structure mismatch.
struct LoadError : Error { using Error::Error; };

/// A primitive op produced a non-finite value, or a computation degenerated
/// (zero long-run variance, constant regression input, exploding loss).
struct NumericError : Error { using Error::Error; };

}  // namespace ttcnet
