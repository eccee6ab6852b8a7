#pragma once

#include <utility>
#include <vector>

#include "cflow/lax.hpp"

namespace cflow {

double mass(const Field& q);
double hamiltonian(const Field& q, Mu mu);

enum class AlphaMethod { series, logdet };

struct AlphaOptions {
    int cutoff = 0;
    double delta = 0.1;
    int max_terms = 40;
    double series_tol = 1e-14;
    bool enforce_ball = true;
};

struct FunctionalReport {
    double mass = 0.0;
    double h_mkdv = 0.0;
    double alpha = 0.0;
    double alpha2 = 0.0;
    double alpha_tail = 0.0;
    double kappa = 1.0;
    Mu mu = Mu::defocusing;
    AlphaMethod method = AlphaMethod::logdet;
    SeriesReport series;
    double imag_residue = 0.0;  // |Im| of the log-determinant, should be rounding-level
};

// A^[2] = mu lambda tr T in closed form; valid for any kappa > 0.
double alpha2_closed(const Field& q, double kappa, Mu mu);

FunctionalReport alpha(const Field& q, double kappa, Mu mu, AlphaMethod method = AlphaMethod::logdet,
                       const AlphaOptions& opts = {});

double alpha_expansion_residual(const Field& q, double kappa, Mu mu);

double poisson_bracket_r(const Field& q, double kappa, double varkappa, Mu mu);

struct VariationalCheck {
    double pairing = 0.0;
    double fd = 0.0;
};

// h <= 0 selects the default 1e-5 (1 + ||q||)
VariationalCheck variational_check(const Field& q, double kappa, Mu mu, const Field& f, double h = 0.0);

struct TwoParameterResiduals {
    double residual1 = 0.0, residual2 = 0.0;
    double scale1 = 0.0, scale2 = 0.0;  // L2 norms of the left-hand sides
};

TwoParameterResiduals two_parameter_identities(const Field& q, double kappa, double varkappa, Mu mu);

double w_symbol(double xi, double kappa);          // product form
double w_symbol_difference(double xi, double kappa);  // difference form
double w_pairing(const Field& q, double kappa);    // <q, w(-i d, kappa) q>

struct EquicontinuityProfile {
    double s = 0.0;
    double kappa = 1.0;
    std::vector<std::pair<long, double>> terms;  // (N, (kappa N)^{2s} <q, w(kappa N) q>)
    double total = 0.0;
};

// n_max <= 0: run N up to the first dyadic with kappa N above the grid's top frequency
EquicontinuityProfile equicontinuity_profile(const Field& q, double s, double kappa, long n_max = 0);

struct SandwichConstants {
    double c1 = 0.0;  // max profile / ||q||^2_{H^s}
    double c2 = 0.0;  // max ||q||^2_{H^s} / (||q||^2_{H^-1} + kappa^2 sum N^{2s} <q, w(kappa N) q>)
};

SandwichConstants sandwich_constants(const std::vector<Field>& corpus, double s, double kappa);

}  // namespace cflow
