// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ttcnet/config.hpp"
#include "ttcnet/layers.hpp"

namespace ttcnet {

// Checkpoint container: magic "CNCK", a format version, the full run
// configuration as canonical text, then every parameter tensor by name in
// registration order (each payload a standard binary tensor record). Storing
// the config inside the file makes a checkpoint self-describing: `eval` can
// rebuild the exact model that produced it.

struct Checkpoint {
    RunConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(std::ostream& os, const RunConfig& cfg, const ParamRegistry& reg);
void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParamRegistry& reg);

Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

/// Copy checkpoint values into an existing registry, matching by name.
/// Throws LoadError if the name sets differ in either direction or any shape
/// disagrees — a checkpoint only applies to the model configuration it was
/// saved from.
void apply_checkpoint(const Checkpoint& ck, ParamRegistry& reg);

}  // namespace ttcnet
