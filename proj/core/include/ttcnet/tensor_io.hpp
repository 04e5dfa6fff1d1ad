#pragma once

#include <iosfwd>
#include <string>

#include "ttcnet/tensor.hpp"

namespace ttcnet {

// Binary tensor container: magic "CNT1", u32 rank, rank x u32 extents,
// then the payload as little-endian float32 in row-major order. Values are
// held as double in memory and narrowed on save / widened on load.

void save_tensor(std::ostream& os, const Tensor& t);
void save_tensor(const std::string& path, const Tensor& t);

Tensor load_tensor(std::istream& is);
Tensor load_tensor(const std::string& path);

}  // namespace ttcnet
