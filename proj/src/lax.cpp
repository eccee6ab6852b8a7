#include "cflow/lax.hpp"

#include <algorithm>
#include <cmath>

namespace cflow {

namespace {

const char* kMod = "lax_greens";

using Mat = Eigen::MatrixXcd;

// Fourier coefficients of the diagonal of an operator given by its matrix on
// the band: c_m = (1/P) sum_{k_a - k_b = m} M(a, b).
std::vector<cplx> antidiagonal_sums(const Mat& m, int cutoff, const Geometry& g) {
    const int n = 2 * cutoff + 1;
    std::vector<cplx> c(g.n, cplx(0.0));
    const int top = std::min(2 * cutoff, g.n / 2 - 1);
    for (int d = -top; d <= top; ++d) {
        cplx acc = 0.0;
        int a0 = std::max(0, d), a1 = std::min(n - 1, n - 1 + d);
        for (int a = a0; a <= a1; ++a) acc += m(a, a - d);
        c[g.slot(d)] = acc / g.period;
    }
    return c;
}

Field field_from(const std::vector<cplx>& c, const Geometry& g, double scale) {
    std::vector<cplx> s(c);
    for (auto& v : s) v *= scale;
    return Field::from_coeffs(g, std::move(s));
}

// c = lambda / tanh(kappa P / 2): converts exact-torus sums to the stated normalisation
double torus_constant(double kappa, const Geometry& g) {
    return lambda_factor(kappa, g) / std::tanh(0.5 * kappa * g.period);
}

void check_kappa(double kappa) {
    if (!(kappa >= 1.0)) throw Error(ErrorKind::invalid_argument, kMod, "kappa must be >= 1");
}

}  // namespace

int default_cutoff(const Geometry& g) { return std::min(g.n / 2, 128); }

double lambda_factor(double kappa, const Geometry& g) {
    check_kappa(kappa);
    return g.kind == GeometryKind::circle ? std::tanh(0.5 * kappa) : 1.0;
}

LaxSystem build_lax(const Field& q, double kappa, Mu mu, int cutoff) {
    check_kappa(kappa);
    const Geometry& g = q.geometry();
    if (cutoff <= 0) cutoff = default_cutoff(g);
    if (cutoff > g.n / 2) throw Error(ErrorKind::invalid_argument, kMod, "cutoff exceeds n_modes/2");
    LaxSystem s;
    s.q = q;
    s.kappa = kappa;
    s.mu = mu;
    s.cutoff = cutoff;
    const int n = 2 * cutoff + 1;
    s.xi.resize(n);
    s.dminus.resize(n);
    s.dplus.resize(n);
    for (int a = 0; a < n; ++a) {
        double xi = g.xi_of_k(a - cutoff);
        s.xi[a] = xi;
        s.dminus(a) = 1.0 / cplx(kappa, -xi);
        s.dplus(a) = 1.0 / cplx(kappa, xi);
    }
    std::vector<cplx> diag(2 * n - 1);
    for (int d = -(n - 1); d <= n - 1; ++d) diag[d + n - 1] = q.coeff_k(d);
    s.Q.resize(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) s.Q(a, b) = diag[a - b + n - 1];
    return s;
}

double hilbert_schmidt_norm(const Eigen::MatrixXcd& t) { return t.norm(); }

Eigen::MatrixXcd t_operator(const LaxSystem& s) {
    Mat dq = s.dminus.asDiagonal() * s.Q;
    Mat pq = s.dplus.asDiagonal() * s.Q;
    return dq * pq;
}

double ball_check(const Field& q, double kappa) { return q.l2() / std::sqrt(kappa); }

Field gamma2(const Field& q, double kappa, Mu mu) {
    check_kappa(kappa);
    Field a = apply_multiplier(q, mult::kappa_minus_inv(2 * kappa));
    Field b = apply_multiplier(q, mult::kappa_plus_inv(2 * kappa));
    return product(a, b) * (-2.0 * sgn(mu));
}

Field gamma2_exact(const Field& q, double kappa, Mu mu) {
    const Geometry& g = q.geometry();
    const double c = torus_constant(kappa, g);
    Field base = gamma2(q, kappa, mu) * c;
    // zero-mode term left over from the double pole of the partial fractions
    double sig = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double xi = g.xi(i);
        sig += std::norm(q.coeffs()[i]) / (4 * kappa * kappa + xi * xi);
    }
    const double kp = kappa * g.period;
    const double w = kp > 600 ? 0.0 : 2.0 * kp / (std::sinh(kp) * std::tanh(0.5 * kp));
    const double corr = -lambda_factor(kappa, g) * sgn(mu) * w * sig;
    return base + Field::constant(g, corr);
}

Field p1(const Field& q, double kappa, Mu mu) {
    check_kappa(kappa);
    const double k4 = 4 * kappa * kappa, m = sgn(mu);
    Field out = apply_multiplier(q, [=](double xi) { return cplx(0.0, -2 * m * xi / (k4 + xi * xi)); });
    return out;
}

Field r1(const Field& q, double kappa, Mu mu) {
    check_kappa(kappa);
    const double k4 = 4 * kappa * kappa, m = sgn(mu);
    return apply_multiplier(q, [=](double xi) { return cplx(4 * m * kappa / (k4 + xi * xi)); });
}

Field p3(const Field& q, double kappa, Mu mu) {
    return p1(product(q, gamma2_exact(q, kappa, mu)), kappa, mu);
}

Field r3(const Field& q, double kappa, Mu mu) {
    return r1(product(q, gamma2_exact(q, kappa, mu)), kappa, mu);
}

namespace {

// Blocks of the order >= 4 remainder X = sum_{l>=4} (-R0 Q)^l R0 of the resolvent.
struct Blocks {
    Mat x11, x12, x21, x22;
};

Blocks remainder_direct(const LaxSystem& s, double& condition, bool diagonal_blocks) {
    const double m = sgn(s.mu);
    // Block elimination of L = [[kappa - d, q], [-mu q, kappa + d]]: the Schur
    // complement of the lower-right block is (kappa - d)(1 + mu T). With
    // Y = (mu T)^2 (1 + mu T)^{-1}, the order >= 4 remainder W^2 L^{-1} is
    //   X11 = Y D-,  X12 = -Y D-QD+,  X21 = mu D+Q Y D-,
    //   X22 = D+Q (T - mu Y) D-QD+.
    Mat dq = s.dminus.asDiagonal() * s.Q;  // D- Q
    Mat pq = s.dplus.asDiagonal() * s.Q;   // D+ Q
    Mat muT = m * (dq * pq);
    Mat lhs = muT;
    lhs.diagonal().array() += 1.0;
    Eigen::PartialPivLU<Mat> lu(lhs);
    const double rc = lu.rcond();
    condition = rc > 0 ? 1.0 / rc : INFINITY;
    if (!(rc > 1e-14)) throw Error(ErrorKind::singular_operator, kMod, "L_q(kappa) is numerically singular");
    Mat Y = lu.solve(muT * muT);
    if (!Y.allFinite()) throw Error(ErrorKind::non_finite, kMod, "non-finite resolvent remainder");
    Mat dqd = dq * s.dplus.asDiagonal();  // D- Q D+
    Blocks b;
    b.x12 = -(Y * dqd);
    b.x21 = m * (pq * (Y * s.dminus.asDiagonal()));
    if (diagonal_blocks) {
        b.x11 = Y * s.dminus.asDiagonal();
        Mat mid = m * muT - m * Y;  // T - mu Y
        b.x22 = pq * (mid * dqd);
    }
    return b;
}

Blocks remainder_series(const LaxSystem& s, const GreensOptions& opts, SeriesReport& rep) {
    const int n = s.dim();
    const double m = sgn(s.mu);
    Mat A = s.dminus.asDiagonal() * s.Q;
    Mat B = (-m) * (s.dplus.asDiagonal() * s.Q);
    // term_1 = -R0 Q R0, used as the reference scale
    Mat t12 = -(A * s.dplus.asDiagonal());
    Mat t21 = -(B * s.dminus.asDiagonal());
    const double ref = std::sqrt(t12.squaredNorm() + t21.squaredNorm());
    rep.terms.push_back(ref);
    // term_l for l = 2, 3, 4 by repeated left multiplication with -R0 Q = [[0,-A],[-B,0]]
    Mat c11 = Mat::Zero(n, n), c12 = t12, c21 = t21, c22 = Mat::Zero(n, n);
    Blocks acc{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)};
    for (int l = 2; l <= opts.max_terms; ++l) {
        Mat n11 = -(A * c21), n12 = -(A * c22), n21 = -(B * c11), n22 = -(B * c12);
        c11.swap(n11);
        c12.swap(n12);
        c21.swap(n21);
        c22.swap(n22);
        const double mag = std::sqrt(c11.squaredNorm() + c12.squaredNorm() + c21.squaredNorm() + c22.squaredNorm());
        rep.terms.push_back(mag);
        if (!std::isfinite(mag) || mag > 1e8 * (ref + 1e-300))
            throw Error(ErrorKind::series_divergence, kMod, "resolvent series terms grow at order " + std::to_string(l));
        if (l >= 4) {
            acc.x11 += c11;
            acc.x12 += c12;
            acc.x21 += c21;
            acc.x22 += c22;
        }
        rep.truncated_at = l;
        if (l >= 4 && mag < opts.series_tol * ref) {
            rep.converged = true;
            break;
        }
        if (ref == 0.0) {
            rep.converged = true;
            break;
        }
    }
    if (!rep.converged)
        throw Error(ErrorKind::series_divergence, kMod,
                    "resolvent series did not converge within " + std::to_string(opts.max_terms) + " terms");
    return acc;
}

}  // namespace

GreensDiagnostics greens_diagnostics(const Field& q, double kappa, Mu mu, GreensMethod method,
                                     const GreensOptions& opts) {
    check_kappa(kappa);
    const Geometry& g = q.geometry();
    LaxSystem s = build_lax(q, kappa, mu, opts.cutoff);
    GreensDiagnostics d;
    d.kappa = kappa;
    d.lambda = lambda_factor(kappa, g);
    d.method = method;

    Blocks x;
    if (method == GreensMethod::direct) {
        x = remainder_direct(s, d.condition, opts.need_gamma);
    } else {
        SeriesReport rep;
        rep.ball_check = ball_check(q, kappa);
        Mat T = t_operator(s);
        const double hs = hilbert_schmidt_norm(T);
        if (hs < 1.0) {
            rep.spectral_radius = hs;  // upper bound suffices
        } else {
            Eigen::ComplexEigenSolver<Mat> es(T, false);
            rep.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
        }
        if (opts.enforce_ball && rep.ball_check > opts.delta) {
            throw Error(ErrorKind::outside_ball, kMod,
                        "series requested outside the ball: kappa^{-1/2}||q|| = " + std::to_string(rep.ball_check));
        }
        if (rep.spectral_radius >= 1.0)
            throw Error(ErrorKind::series_divergence, kMod, "spectral radius of mu T is >= 1");
        x = remainder_series(s, opts, rep);
        d.series = rep;
    }

    const double lam = d.lambda, m = sgn(mu);
    const int K = s.cutoff;
    auto diag = [&](const Mat& blk) { return antidiagonal_sums(blk, K, g); };
    auto g12 = diag(x.x12), g21 = diag(x.x21);
    std::vector<cplx> rsum(g.n), psum(g.n);
    for (int i = 0; i < g.n; ++i) {
        rsum[i] = g21[i] - m * g12[i];
        psum[i] = g21[i] + m * g12[i];
    }
    const double c = torus_constant(kappa, g);
    Field g2 = gamma2_exact(q, kappa, mu);
    Field qg = product(q, g2);
    if (x.x11.size() > 0) {
        auto g11 = diag(x.x11), g22 = diag(x.x22);
        std::vector<cplx> gsum(g.n);
        for (int i = 0; i < g.n; ++i) gsum[i] = g11[i] + g22[i];
        d.gamma = g2 + field_from(gsum, g, lam);
    } else {
        d.gamma = Field::zero(g);
    }
    d.r = r1(q, kappa, mu) * c + r1(qg, kappa, mu) + field_from(rsum, g, lam);
    d.p = p1(q, kappa, mu) * c + p1(qg, kappa, mu) + field_from(psum, g, lam);
    return d;
}

namespace {
double rel(const Field& a, const Field& b) {
    double s = std::max(a.l2(), b.l2());
    return s == 0.0 ? 0.0 : (a - b).l2() / s;
}
}  // namespace

double IdentityResiduals::max() const { return std::max({gamma_prime, p_prime, r_prime, r_consistency}); }

IdentityResiduals identity_residuals(const Field& q, const GreensDiagnostics& d, Mu mu) {
    const double k = d.kappa, m = sgn(mu);
    Field gq = product(d.gamma, q);
    IdentityResiduals out;
    out.gamma_prime = rel(derivative(d.gamma), product(q, d.p) * 2.0);
    out.p_prime = rel(derivative(d.p), d.r * (-2 * k) + (q + gq) * (2 * m));
    out.r_prime = rel(derivative(d.r), d.p * (-2 * k));
    out.r_consistency = rel(d.r * (m / (4 * k)), apply_multiplier(q + gq, mult::helmholtz_inv(k)));
    return out;
}

Remainders remainders(const Field& q, const GreensDiagnostics& d, Mu mu) {
    return {d.gamma - gamma2(q, d.kappa, mu), d.p - p1(q, d.kappa, mu) - p3(q, d.kappa, mu),
            d.r - r1(q, d.kappa, mu) - r3(q, d.kappa, mu)};
}

}  // namespace cflow
