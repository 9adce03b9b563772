#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tbs/tape.hpp"

namespace tbs {

// One finite-difference check. `inputs` returns the tensors to perturb; `loss`
// records a scalar on a fresh tape and must reach every input through
// Tape::param (directly or via the layer params that own them).
struct GradcheckCase {
    std::string name;
    bool primitive = false;
    std::function<std::vector<Tensor<double>*>()> inputs;
    std::function<Var(Tape<double>&)> loss;
};

struct GradcheckOptions {
    std::size_t probes = 100;
    double h = 1e-3;  // five-point central stencil
    double tolerance = 1e-4;
    double floor = 1e-8;  // relative error is |a - n| / max(|a|, |n|, floor)
    std::size_t max_attempts_per_probe = 50;
    std::uint64_t seed = 0x9c;
};

struct GradcheckResult {
    std::string name;
    bool primitive = false;
    double max_rel_error = 0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
    std::size_t probes = 0;
    std::size_t skipped = 0;  // probes discarded because they crossed a kink
    bool passed = false;
};

// Names of the differentiable primitives in tbs::ops.
const std::vector<std::string>& primitive_op_names();

// One case per primitive plus the attention, TBS, encoder, head and full
// encoder -> TBS -> head composites.
std::vector<GradcheckCase> default_gradcheck_cases(std::uint64_t seed);

GradcheckResult run_gradcheck(const GradcheckCase& c, const GradcheckOptions& opts = {});

// Runs every case, prints one line per case and returns true iff all pass.
bool run_gradcheck_suite(const std::vector<GradcheckCase>& cases, const GradcheckOptions& opts, std::ostream& report,
                         std::vector<GradcheckResult>* results = nullptr);

}  // namespace tbs
