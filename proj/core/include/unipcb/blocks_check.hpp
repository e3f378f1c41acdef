#pragma once

#include <string>
#include <vector>

namespace unipcb::det {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // failure reason, or a short pass note
};

/// Names of every registered invariant case, in execution order.
std::vector<std::string> block_check_names();

/// Runs the detector-block invariant sweep. Cases derive their seeds from
/// their own names, so results are identical whether they run in parallel
/// or inline. A non-empty filter keeps cases whose name contains it as a
/// substring; an unknown filter yields an empty list.
std::vector<CheckResult> run_block_checks(const std::string& filter = "",
                                          std::size_t workers = 0);

} // namespace unipcb::det
