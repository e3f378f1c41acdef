#pragma once

#include <iosfwd>
#include <string>

#include "unipcb/tensor.hpp"

namespace unipcb {

// Plain-text tensor format:
//   shape: d0 d1 ... dk
//   v v v ...            (one line per innermost row, row-major order)
// Values are written with 17 significant digits so a write/read cycle is
// lossless for float64.

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

std::string tensor_to_string(const Tensor& t);
Tensor tensor_from_string(const std::string& text);

} // namespace unipcb
