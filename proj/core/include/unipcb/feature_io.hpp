#pragma once

#include <string>

#include "unipcb/tensor.hpp"

namespace unipcb::metrics {

/// Feature CSV: first line `dim: d`, then one comma-separated vector of d
/// values per row. Returns an (n, d) tensor.
Tensor load_feature_csv(const std::string& path);
void save_feature_csv(const std::string& path, const Tensor& features);

} // namespace unipcb::metrics
