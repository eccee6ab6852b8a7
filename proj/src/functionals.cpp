#include "cflow/functionals.hpp"

#include <algorithm>
#include <cmath>

namespace cflow {

namespace {

const char* kMod = "functionals";

using Mat = Eigen::MatrixXcd;

// log(1 + x) - x without cancellation for small |x|
cplx log1p_minus(cplx x) {
    if (std::abs(x) < 0.1) {
        cplx acc = 0.0, pw = x;
        for (int m = 2; m < 40; ++m) {
            pw *= x;
            acc += (m % 2 == 0 ? -1.0 : 1.0) * pw / double(m);
            if (std::abs(pw) < 1e-18 * std::abs(acc)) break;
        }
        return acc;
    }
    return std::log(1.0 + x) - x;
}

double hs_norm2(const Field& q, double s) {
    const double v = sobolev_norm(q, {s, 1.0});
    return v * v;
}

}  // namespace

double mass(const Field& q) { return 0.5 * inner(q, q); }

double hamiltonian(const Field& q, Mu mu) {
    Field dq = derivative(q);
    // the zero mode of q^4 is alias-free on the 2x padded grid
    double q4 = integral(product({&q, &q, &q, &q}));
    return 0.5 * inner(dq, dq) + 0.5 * sgn(mu) * q4;
}

double alpha2_closed(const Field& q, double kappa, Mu mu) {
    if (!(kappa > 0)) throw Error(ErrorKind::invalid_argument, kMod, "kappa must be positive");
    const Geometry& g = q.geometry();
    double lam = g.kind == GeometryKind::circle ? std::tanh(0.5 * kappa) : 1.0;
    double c = lam / std::tanh(0.5 * kappa * g.period);
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double xi = g.xi(i);
        acc += 2 * kappa * std::norm(q.coeffs()[i]) / (4 * kappa * kappa + xi * xi);
    }
    return sgn(mu) * g.period * c * acc;
}

FunctionalReport alpha(const Field& q, double kappa, Mu mu, AlphaMethod method, const AlphaOptions& opts) {
    FunctionalReport rep;
    rep.kappa = kappa;
    rep.mu = mu;
    rep.method = method;
    rep.mass = mass(q);
    rep.h_mkdv = hamiltonian(q, mu);
    const double lam = lambda_factor(kappa, q.geometry());
    const double m = sgn(mu);
    rep.alpha2 = alpha2_closed(q, kappa, mu);
    rep.series.ball_check = ball_check(q, kappa);

    LaxSystem s = build_lax(q, kappa, mu, opts.cutoff);
    Mat T = t_operator(s);

    if (method == AlphaMethod::series) {
        if (opts.enforce_ball && rep.series.ball_check > opts.delta)
            throw Error(ErrorKind::outside_ball, kMod,
                        "series requested outside the ball: kappa^{-1/2}||q|| = " + std::to_string(rep.series.ball_check));
        // tail = mu lambda sum_{m>=2} (-mu)^{m-1}/m tr T^m
        const double t1 = std::abs(T.trace());
        rep.series.terms.push_back(t1);
        Mat pw = T;
        double tail = 0.0;
        bool done = t1 == 0.0;
        for (int k = 2; k <= opts.max_terms && !done; ++k) {
            pw = pw * T;
            cplx tr = pw.trace();
            double mag = std::abs(tr);
            rep.series.terms.push_back(mag);
            rep.series.truncated_at = k;
            if (!std::isfinite(mag) || mag > 1e8 * t1)
                throw Error(ErrorKind::series_divergence, kMod, "trace series grows at order " + std::to_string(k));
            tail += (std::pow(-m, k - 1) / k) * tr.real();
            if (mag < opts.series_tol * t1) done = true;
        }
        if (!done)
            throw Error(ErrorKind::series_divergence, kMod,
                        "trace series did not converge within " + std::to_string(opts.max_terms) + " terms");
        rep.series.converged = true;
        rep.alpha_tail = m * lam * tail;
    } else {
        Eigen::ComplexEigenSolver<Mat> es(T, false);
        cplx acc = 0.0;
        double rad = 0.0;
        for (int j = 0; j < es.eigenvalues().size(); ++j) {
            cplx x = m * es.eigenvalues()(j);
            rad = std::max(rad, std::abs(x));
            if (x.real() <= -1.0 && std::abs(x.imag()) <= 1e-12 * (1.0 + std::abs(x)))
                throw Error(ErrorKind::log_branch, kMod, "eigenvalue of mu T at or below -1");
            acc += log1p_minus(x);
        }
        rep.series.spectral_radius = rad;
        rep.series.converged = true;
        rep.imag_residue = std::abs(acc.imag());
        rep.alpha_tail = lam * acc.real();
    }
    rep.alpha = rep.alpha2 + rep.alpha_tail;
    return rep;
}

double alpha_expansion_residual(const Field& q, double kappa, Mu mu) {
    const double m = sgn(mu);
    double a = alpha(q, kappa, mu).alpha;
    return std::abs(a - (m / kappa) * mass(q) + (m / (4 * kappa * kappa * kappa)) * hamiltonian(q, mu));
}

double poisson_bracket_r(const Field& q, double kappa, double varkappa, Mu mu) {
    if (kappa == varkappa) throw Error(ErrorKind::invalid_argument, kMod, "bracket needs distinct parameters");
    Field ra = greens_diagnostics(q, kappa, mu).r;
    Field rb = greens_diagnostics(q, varkappa, mu).r;
    return inner(ra, derivative(rb));
}

VariationalCheck variational_check(const Field& q, double kappa, Mu mu, const Field& f, double h) {
    if (h <= 0) h = 1e-5 * (1.0 + q.l2());
    VariationalCheck v;
    v.pairing = inner(f, greens_diagnostics(q, kappa, mu).r);
    if (f.l2() == 0.0) return v;
    double ap = alpha(q + f * h, kappa, mu).alpha;
    double am = alpha(q - f * h, kappa, mu).alpha;
    v.fd = (ap - am) / (2 * h);
    return v;
}

TwoParameterResiduals two_parameter_identities(const Field& q, double kappa, double varkappa, Mu mu) {
    if (kappa == varkappa) throw Error(ErrorKind::invalid_argument, kMod, "identities need distinct parameters");
    const Geometry& g = q.geometry();
    const double m = sgn(mu);
    auto a = greens_diagnostics(q, kappa, mu);
    auto b = greens_diagnostics(q, varkappa, mu);
    Field one = Field::constant(g, 1.0);
    Field ga = a.gamma + one, gb = b.gamma + one;
    Field lhs1 = product(a.p, b.r) - product(a.r, b.p);
    Field lhs2 = product(a.p, b.r) + product(a.r, b.p);
    Field ggm = product(ga, gb) * m;
    Field in1 = product(a.p, b.p) - product(a.r, b.r) - ggm;
    Field in2 = product(a.p, b.p) + product(a.r, b.r) - ggm;
    Field rhs1 = derivative(in1) * (1.0 / (2 * (kappa - varkappa)));
    Field rhs2 = derivative(in2) * (-1.0 / (2 * (kappa + varkappa)));
    TwoParameterResiduals out;
    out.residual1 = (lhs1 - rhs1).l2();
    out.residual2 = (lhs2 - rhs2).l2();
    out.scale1 = std::max(lhs1.l2(), rhs1.l2());
    out.scale2 = std::max(lhs2.l2(), rhs2.l2());
    return out;
}

double w_symbol(double xi, double kappa) {
    double k2 = kappa * kappa, x2 = xi * xi;
    return 3 * k2 * x2 / (4 * (x2 + k2) * (x2 + 4 * k2));
}

double w_symbol_difference(double xi, double kappa) {
    double k2 = kappa * kappa, x2 = xi * xi;
    return k2 / (x2 + 4 * k2) - 0.25 * k2 / (x2 + k2);
}

double w_pairing(const Field& q, double kappa) {
    const Geometry& g = q.geometry();
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) acc += w_symbol(g.xi(i), kappa) * std::norm(q.coeffs()[i]);
    return g.period * acc;
}

EquicontinuityProfile equicontinuity_profile(const Field& q, double s, double kappa, long n_max) {
    if (!(s >= 0.0 && s < 1.0)) throw Error(ErrorKind::invalid_argument, kMod, "equicontinuity needs 0 <= s < 1");
    if (!(kappa >= 1.0)) throw Error(ErrorKind::invalid_argument, kMod, "kappa must be >= 1");
    EquicontinuityProfile prof;
    prof.s = s;
    prof.kappa = kappa;
    const double top = q.geometry().max_xi();
    if (n_max <= 0) {
        n_max = 1;
        while (kappa * n_max < top) n_max *= 2;
    }
    for (long n = 1; n <= n_max; n *= 2) {
        double kn = kappa * n;
        double v = std::pow(kn, 2 * s) * w_pairing(q, kn);
        prof.terms.emplace_back(n, v);
        prof.total += v;
    }
    return prof;
}

SandwichConstants sandwich_constants(const std::vector<Field>& corpus, double s, double kappa) {
    SandwichConstants c;
    for (const Field& q : corpus) {
        double hs = hs_norm2(q, s);
        if (hs == 0.0) continue;
        auto prof = equicontinuity_profile(q, s, kappa);
        double low = 0.0;
        for (auto& [n, v] : prof.terms) low += std::pow(double(n), 2 * s) * w_pairing(q, kappa * n);
        double rhs = hs_norm2(q, -1.0) + kappa * kappa * low;
        c.c1 = std::max(c.c1, prof.total / hs);
        c.c2 = std::max(c.c2, hs / rhs);
    }
    return c;
}

}  // namespace cflow
