// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/flops.hpp"

namespace ttcnet::flops {

namespace {
thread_local std::uint64_t counter = 0;
}

std::uint64_t count() { return counter; }
void reset() { counter = 0; }
void add(std::uint64_t units) { counter += units; }

}  // namespace ttcnet::flops
