#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

// Central finite differences against reverse-mode gradients. The forward
// closure must rebuild the graph from the given leaves on every call; it is
// evaluated under NoGradGuard for the numeric side. Non-scalar outputs are
// reduced with a fixed random weighting so the whole Jacobian is exercised.
//
// Error metric per coordinate: |analytic - numeric| / max(1, |numeric|).
double max_rel_grad_error(const std::function<TensorPtr()>& forward,
                          const std::vector<TensorPtr>& leaves, double h = 1e-5,
                          int max_coords_per_leaf = -1, uint64_t seed = 0x5eed);

struct OpGradReport {
    std::string op;
    double max_rel_err = 0.0;
    int instances = 0;
};

// Runs the finite-difference suite over every differentiable op and the full
// model + combined loss. All checks use 64-bit precision and step 1e-5.
std::vector<OpGradReport> run_gradcheck_suite(int instances_per_op = 20, uint64_t seed = 99);

constexpr double kGradCheckTolerance = 1e-4;

}  // namespace mulcon
