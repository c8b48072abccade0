#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gansic {

struct GradCheckReport {
    std::string suite;
    double max_rel_err = 0.0;
    std::size_t checked = 0;  // number of analytic derivatives compared
};

// Central-difference verification (h = 1e-5) of every analytic gradient
// path: a batch-normalized MLP, the detector stack end to end (parameters
// and received-signal gradient), the discriminator objective, and the
// generator objective back through the discriminator. Relative errors are
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3); healthy suites
// stay below 1e-4.
std::vector<GradCheckReport> run_gradcheck_suites(std::uint64_t seed);

}  // namespace gansic
