#pragma once

namespace unipcb {

// All numeric comparison constants used by invariant checks live here so
// they can be audited in one place. Everything downstream (tests, the
// blocks-check sweep, acceptance gates) reads these rather than inlining
// magic numbers.
struct Tolerances {
    double softmax_row_sum      = 1e-9;   // |sum - 1| along the reduced axis
    double group_norm_mean      = 1e-6;   // per-group |mean| after normalization
    double group_norm_var       = 1e-4;   // per-group |var - 1|
    double ddim_single_step     = 1e-9;   // exact-inversion round trip, one step
    double ddim_skip_chain      = 1e-7;   // 10-step skip chain round trip
    double oracle_equality      = 1e-10;  // composed naive-oracle comparisons
    double grad_check_rel       = 1e-4;   // analytic vs central-difference
    double fid_self             = 1e-6;   // fid(s, s)
    double fid_closed_form      = 1e-9;   // scalar / diagonal closed forms
    double ap_discretization    = 1e-2;   // 101-point vs all-point integration
    double unit_norm            = 1e-9;   // |L2 - 1| of embedding stubs
    double psnr_db              = 1e-3;   // dB comparisons
};

inline const Tolerances& tolerances() {
    static const Tolerances t{};
    return t;
}

} // namespace unipcb
