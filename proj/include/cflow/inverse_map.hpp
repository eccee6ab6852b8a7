#pragma once

#include <vector>

#include "cflow/lax.hpp"

namespace cflow {

struct InversionReport {
    Field q_recovered;
    int iterations = 0;
    double final_residual = 0.0;               // ||forward_r(q) - target||_{H^2_kappa}
    std::vector<double> contraction_estimates;  // residual after each iteration
    bool converged = false;
};

// (mu / 4 kappa) r(kappa, q)
Field forward_r(const Field& q, double kappa, Mu mu, int cutoff = 0);

// Picard iteration q <- (4 kappa^2 - d^2) target - gamma(kappa, q) q.
// Throws divergence after three consecutive residual increases and
// max_iterations when the budget runs out.
InversionReport invert_r(const Field& target, double kappa, Mu mu, double tol = 1e-10, int max_iter = 100,
                         int cutoff = 0);

}  // namespace cflow
