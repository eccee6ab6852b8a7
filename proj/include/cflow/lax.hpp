#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "cflow/spectral.hpp"

namespace cflow {

enum class Mu : int { defocusing = 1, focusing = -1 };
inline double sgn(Mu m) { return static_cast<int>(m); }

// Truncated Fourier picture of L_q(kappa) on the band |k| <= K.
struct LaxSystem {
    Field q;
    double kappa = 1.0;
    Mu mu = Mu::defocusing;
    int cutoff = 0;
    std::vector<double> xi;     // xi_k for k = -K..K
    Eigen::VectorXcd dminus;    // 1/(kappa - i xi)
    Eigen::VectorXcd dplus;     // 1/(kappa + i xi)
    Eigen::MatrixXcd Q;         // Q(a, b) = c_{k_a - k_b}

    int dim() const { return 2 * cutoff + 1; }
};

int default_cutoff(const Geometry& g);

LaxSystem build_lax(const Field& q, double kappa, Mu mu, int cutoff = 0);

double hilbert_schmidt_norm(const Eigen::MatrixXcd& t);

// T = D- Q D+ Q, the operator whose log-determinant gives A.
Eigen::MatrixXcd t_operator(const LaxSystem& sys);

double lambda_factor(double kappa, const Geometry& g);

enum class GreensMethod { series, direct };

struct SeriesReport {
    std::vector<double> terms;  // per-order magnitudes
    int truncated_at = 0;
    double ball_check = 0.0;    // kappa^{-1/2} ||q||
    double spectral_radius = 0.0;
    bool converged = false;
};

struct GreensOptions {
    int cutoff = 0;          // 0: default_cutoff
    double delta = 0.1;      // smallness ball
    int max_terms = 40;
    double series_tol = 1e-14;
    bool enforce_ball = true;
    bool need_gamma = true;  // direct method: skip the diagonal blocks when only r, p are used
};

struct GreensDiagnostics {
    Field gamma, p, r;
    double kappa = 1.0;
    double lambda = 1.0;
    GreensMethod method = GreensMethod::direct;
    std::optional<SeriesReport> series;
    double condition = 0.0;  // 1-norm condition estimate of the block matrix (direct)
};

GreensDiagnostics greens_diagnostics(const Field& q, double kappa, Mu mu,
                                     GreensMethod method = GreensMethod::direct,
                                     const GreensOptions& opts = {});

// Low-order pieces. gamma2 is the stated line formula; gamma2_exact adds the
// zero-mode constant that appears on a finite torus.
Field gamma2(const Field& q, double kappa, Mu mu);
Field gamma2_exact(const Field& q, double kappa, Mu mu);
Field p1(const Field& q, double kappa, Mu mu);
Field r1(const Field& q, double kappa, Mu mu);
Field p3(const Field& q, double kappa, Mu mu);
Field r3(const Field& q, double kappa, Mu mu);

struct Remainders {
    Field gamma_ge4;  // gamma - gamma2
    Field p_ge5;      // p - p1 - p3
    Field r_ge5;      // r - r1 - r3
};

Remainders remainders(const Field& q, const GreensDiagnostics& d, Mu mu);

double ball_check(const Field& q, double kappa);

// Relative residuals ||lhs - rhs|| / max(||lhs||, ||rhs||) of
// gamma' = 2qp, p' = -2 kappa r + 2 mu q (gamma + 1), r' = -2 kappa p and
// (mu / 4 kappa) r = (4 kappa^2 - d^2)^{-1}(q + gamma q).
struct IdentityResiduals {
    double gamma_prime = 0.0, p_prime = 0.0, r_prime = 0.0, r_consistency = 0.0;
    double max() const;
};

IdentityResiduals identity_residuals(const Field& q, const GreensDiagnostics& d, Mu mu);

}  // namespace cflow
