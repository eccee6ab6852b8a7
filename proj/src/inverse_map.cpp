#include "cflow/inverse_map.hpp"

#include <cmath>

namespace cflow {

namespace {

const char* kMod = "inverse_map";

GreensDiagnostics diagnostics(const Field& q, double kappa, Mu mu, int cutoff) {
    GreensOptions o;
    o.cutoff = cutoff;
    return greens_diagnostics(q, kappa, mu, GreensMethod::direct, o);
}

}  // namespace

Field forward_r(const Field& q, double kappa, Mu mu, int cutoff) {
    return diagnostics(q, kappa, mu, cutoff).r * (sgn(mu) / (4 * kappa));
}

InversionReport invert_r(const Field& target, double kappa, Mu mu, double tol, int max_iter, int cutoff) {
    if (!(kappa >= 1.0)) throw Error(ErrorKind::invalid_argument, kMod, "kappa must be >= 1");
    const double k4 = 4 * kappa * kappa;
    const Field lifted = apply_multiplier(target, [k4](double xi) { return cplx(k4 + xi * xi); });
    InversionReport rep;
    Field q = lifted;
    int rising = 0;
    double prev = INFINITY;
    for (int it = 1; it <= max_iter; ++it) {
        auto d = diagnostics(q, kappa, mu, cutoff);
        // residual of the current iterate, then the Picard update
        Field image = d.r * (sgn(mu) / (4 * kappa));
        double res = sobolev_norm(image - target, {2.0, kappa});
        if (it > 1) rep.contraction_estimates.push_back(res);
        rep.q_recovered = q;
        rep.final_residual = res;
        rep.iterations = it;  // q_1 = lifted target is the first Picard step from q_0 = 0
        if (res <= tol) {
            rep.converged = true;
            return rep;
        }
        rising = res > prev ? rising + 1 : 0;
        if (rising >= 3) throw Error(ErrorKind::divergence, kMod, "fixed-point residual grew three times in a row");
        prev = res;
        q = lifted - product(d.gamma, q);
    }
    auto d = diagnostics(q, kappa, mu, cutoff);
    double res = sobolev_norm(d.r * (sgn(mu) / (4 * kappa)) - target, {2.0, kappa});
    rep.contraction_estimates.push_back(res);
    rep.q_recovered = q;
    rep.final_residual = res;
    rep.iterations = max_iter;
    if (res <= tol) {
        rep.converged = true;
        return rep;
    }
    throw Error(ErrorKind::max_iterations, kMod, "no convergence in " + std::to_string(max_iter) + " iterations");
}

}  // namespace cflow
