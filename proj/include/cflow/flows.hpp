#pragma once

#include <vector>

#include "cflow/functionals.hpp"

namespace cflow {

enum class FlowKind { mkdv, renorm_mkdv, mass, h_kappa, difference };
enum class Integrator { etd_rk4, if_rk4 };

const char* to_string(FlowKind k);

struct FlowSpec {
    FlowKind kind = FlowKind::mkdv;
    Mu mu = Mu::defocusing;
    double kappa = 0.0;  // h_kappa and difference only
    double dt = 1e-5;
    double t_final = 0.0;  // may be negative
    Integrator integrator = Integrator::etd_rk4;
    int save_every = 1;
    std::vector<double> probe_kappas;  // A(kappa*) logged at each save
    int cutoff = 0;                    // Lax cutoff for kappa flows; 0: min(N/2, 32)
    bool enforce_stability = true;
};

struct ConservedRecord {
    double mass = 0.0;
    double h_mkdv = 0.0;
    std::vector<double> alpha;  // one per probe kappa
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Field> states;
    std::vector<ConservedRecord> conserved_log;
    std::vector<double> probe_kappas;
    Mu mu = Mu::defocusing;
};

// Thrown when a run stops part way; carries the last good state.
class EvolveError : public Error {
public:
    EvolveError(ErrorKind kind, const std::string& what, Field last, double t)
        : Error(kind, "flows", what), last_state(std::move(last)), last_time(t) {}
    Field last_state;
    double last_time;
};

// Linear symbol L(xi) of the flow (q_t = L q + N(q)) and the nonlinear part.
cplx linear_symbol(const FlowSpec& spec, double xi);
Field nonlinear_part(const Field& q, const FlowSpec& spec);
Field vector_field(const Field& q, const FlowSpec& spec);

// Largest dt allowed by the stability policy for this initial datum.
double stability_limit(const Field& q0, const FlowSpec& spec);

Trajectory evolve(const Field& q0, const FlowSpec& spec);

Trajectory gauge_transform(const Trajectory& traj, Mu mu);

enum class DifferenceFrame { interaction, lab };

struct REvolutionResidual {
    double residual = 0.0;
    double r_norm = 0.0;  // ||r(varkappa)||_{L2}
};

// flow = mkdv observes r(varkappa) (kappa unused); flow = h_kappa flows H_kappa
// and observes r(varkappa).
REvolutionResidual r_evolution_residual(const Field& q, double kappa, double varkappa, Mu mu, FlowKind flow,
                                        double dt = 1e-4, DifferenceFrame frame = DifferenceFrame::interaction,
                                        int cutoff = 0);

double commuting_composition_check(const Field& q0, double kappa, Mu mu, double t, double dt = 1e-5,
                                   int cutoff = 0);

struct KappaSweep {
    std::vector<double> kappas;
    std::vector<double> sup_dist;  // sup_{|t| <= T} ||r(varkappa; q(t)) - r(varkappa; q0)||_{H^2}
    double fitted_exponent = 0.0;
    bool strictly_decreasing = false;
};

KappaSweep kappa_approximation_sweep(const Field& q0, double varkappa, Mu mu, double T,
                                     const std::vector<double>& kappas, double dt = 1e-4, int samples = 20,
                                     int cutoff = 0);

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cflow
