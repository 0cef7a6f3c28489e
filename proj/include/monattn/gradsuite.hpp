#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace monattn {

struct OpCheckResult {
    std::string op;
    int instances = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    bool pass = false;
};

// Every differentiable operation in the training path, by name.
std::vector<std::string> gradcheck_op_names();

// Checks one op against central finite differences over n random instances.
// Relative error uses an absolute floor of 1e-4 (entries below it sit at the
// FD noise floor) and is paired with a strict 1e-8 absolute bound.
OpCheckResult run_gradcheck_op(const std::string& op, int n_instances, double h,
                               double rel_tol, uint64_t seed);

std::vector<OpCheckResult> run_gradcheck_all(int n_instances, double h,
                                             double rel_tol, uint64_t seed);

}  // namespace monattn
