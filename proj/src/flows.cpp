#include "cflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cflow {

namespace {

const char* kMod = "flows";

using Coeffs = std::vector<cplx>;

int flow_cutoff(const FlowSpec& spec, const Geometry& g) {
    return spec.cutoff > 0 ? spec.cutoff : std::min(g.n / 2, 32);
}

bool has_kappa(FlowKind k) { return k == FlowKind::h_kappa || k == FlowKind::difference; }

// r(kappa) - r^[1](kappa): the part of the kappa-flow vector field left after
// the linear symbol has absorbed r^[1]
Field r_nonlinear(const Field& q, double kappa, Mu mu, int cutoff) {
    GreensOptions o;
    o.cutoff = cutoff;
    o.need_gamma = false;
    Field r = greens_diagnostics(q, kappa, mu, GreensMethod::direct, o).r;
    return r - r1(q, kappa, mu);
}

// phi-functions for ETDRK4 by contour averaging (Kassam & Trefethen), full
// circle since the symbols are imaginary
struct EtdCoeffs {
    Coeffs e, e2, q, f1, f2, f3;
};

EtdCoeffs etd_coeffs(const Coeffs& lin, double h) {
    const int m = 64;
    EtdCoeffs c;
    const size_t n = lin.size();
    c.e.resize(n);
    c.e2.resize(n);
    c.q.resize(n);
    c.f1.resize(n);
    c.f2.resize(n);
    c.f3.resize(n);
    for (size_t i = 0; i < n; ++i) {
        cplx hl = h * lin[i];
        c.e[i] = std::exp(hl);
        c.e2[i] = std::exp(0.5 * hl);
        cplx sq = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (int j = 0; j < m; ++j) {
            cplx z = hl + std::exp(cplx(0.0, 2.0 * std::numbers::pi * (j + 0.5) / m));
            cplx ez = std::exp(z), ez2 = std::exp(0.5 * z), z3 = z * z * z;
            sq += (ez2 - 1.0) / z;
            s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
            s2 += (2.0 + z + ez * (z - 2.0)) / z3;
            s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
        }
        c.q[i] = h * sq / double(m);
        c.f1[i] = h * s1 / double(m);
        c.f2[i] = h * s2 / double(m);
        c.f3[i] = h * s3 / double(m);
    }
    return c;
}

class Stepper {
public:
    Stepper(const Geometry& g, const FlowSpec& spec, double h) : g_(g), spec_(spec), h_(h) {
        lin_.resize(g.n);
        for (int i = 0; i < g.n; ++i) lin_[i] = i == g.n / 2 ? cplx(0.0) : linear_symbol(spec, g.xi(i));
        if (spec.integrator == Integrator::etd_rk4) {
            etd_ = etd_coeffs(lin_, h);
        } else {
            etd_.e.resize(g.n);
            etd_.e2.resize(g.n);
            for (int i = 0; i < g.n; ++i) {
                etd_.e[i] = std::exp(h * lin_[i]);
                etd_.e2[i] = std::exp(0.5 * h * lin_[i]);
            }
        }
    }

    Coeffs nl(const Coeffs& v) const {
        Field q = Field::from_coeffs(g_, v);
        return nonlinear_part(q, spec_).coeffs();
    }

    Coeffs step(const Coeffs& v) const {
        const size_t n = v.size();
        Coeffs out(n);
        if (spec_.integrator == Integrator::etd_rk4) {
            const auto& c = etd_;
            Coeffs nv = nl(v), a(n), b(n), cc(n);
            for (size_t i = 0; i < n; ++i) a[i] = c.e2[i] * v[i] + c.q[i] * nv[i];
            Coeffs na = nl(a);
            for (size_t i = 0; i < n; ++i) b[i] = c.e2[i] * v[i] + c.q[i] * na[i];
            Coeffs nb = nl(b);
            for (size_t i = 0; i < n; ++i) cc[i] = c.e2[i] * a[i] + c.q[i] * (2.0 * nb[i] - nv[i]);
            Coeffs nc = nl(cc);
            for (size_t i = 0; i < n; ++i)
                out[i] = c.e[i] * v[i] + c.f1[i] * nv[i] + 2.0 * c.f2[i] * (na[i] + nb[i]) + c.f3[i] * nc[i];
        } else {
            // Lawson RK4 in the interaction picture
            const auto& e = etd_.e;
            const auto& e2 = etd_.e2;
            const double h = h_;
            Coeffs k1 = nl(v), a(n), b(n), cc(n);
            for (size_t i = 0; i < n; ++i) a[i] = e2[i] * (v[i] + 0.5 * h * k1[i]);
            Coeffs k2 = nl(a);
            for (size_t i = 0; i < n; ++i) b[i] = e2[i] * v[i] + 0.5 * h * k2[i];
            Coeffs k3 = nl(b);
            for (size_t i = 0; i < n; ++i) cc[i] = e[i] * v[i] + h * e2[i] * k3[i];
            Coeffs k4 = nl(cc);
            for (size_t i = 0; i < n; ++i)
                out[i] = e[i] * v[i] + h / 6.0 * (e[i] * k1[i] + 2.0 * e2[i] * (k2[i] + k3[i]) + k4[i]);
        }
        return out;
    }

private:
    Geometry g_;
    FlowSpec spec_;
    double h_;
    Coeffs lin_;
    EtdCoeffs etd_;
};

ConservedRecord record(const Field& q, const FlowSpec& spec) {
    ConservedRecord r;
    r.mass = mass(q);
    r.h_mkdv = hamiltonian(q, spec.mu);
    for (double k : spec.probe_kappas) r.alpha.push_back(alpha(q, k, spec.mu).alpha);
    return r;
}

bool finite(const Coeffs& v) {
    for (auto& c : v)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

}  // namespace

const char* to_string(FlowKind k) {
    switch (k) {
        case FlowKind::mkdv: return "mkdv";
        case FlowKind::renorm_mkdv: return "renorm_mkdv";
        case FlowKind::mass: return "mass";
        case FlowKind::h_kappa: return "h_kappa";
        case FlowKind::difference: return "difference";
    }
    return "unknown";
}

cplx linear_symbol(const FlowSpec& spec, double xi) {
    const double k2 = 4 * spec.kappa * spec.kappa, x2 = xi * xi;
    switch (spec.kind) {
        case FlowKind::mkdv:
        case FlowKind::renorm_mkdv: return cplx(0.0, xi * x2);  // -d^3
        case FlowKind::mass: return cplx(0.0, xi);
        // 4k^2 d - 4 mu k^3 d r^[1]
        case FlowKind::h_kappa: return cplx(0.0, xi * k2 * x2 / (k2 + x2));
        case FlowKind::difference: return cplx(0.0, xi * x2 * x2 / (k2 + x2));
    }
    return 0.0;
}

Field nonlinear_part(const Field& q, const FlowSpec& spec) {
    const double m = sgn(spec.mu);
    const Geometry& g = q.geometry();
    const double k = spec.kappa, k3 = k * k * k;
    switch (spec.kind) {
        case FlowKind::mkdv: return derivative(cube(q)) * (2 * m);
        case FlowKind::renorm_mkdv: {
            double q2 = inner(q, q);
            return derivative(cube(q)) * (2 * m) - derivative(q) * (6 * m * q2);
        }
        case FlowKind::mass: return Field::zero(g);
        case FlowKind::h_kappa:
            return derivative(r_nonlinear(q, k, spec.mu, flow_cutoff(spec, g))) * (-4 * m * k3);
        case FlowKind::difference:
            return derivative(cube(q)) * (2 * m) +
                   derivative(r_nonlinear(q, k, spec.mu, flow_cutoff(spec, g))) * (4 * m * k3);
    }
    return Field::zero(g);
}

Field vector_field(const Field& q, const FlowSpec& spec) {
    const Geometry& g = q.geometry();
    Coeffs c = q.coeffs();
    for (int i = 0; i < g.n; ++i) c[i] *= linear_symbol(spec, g.xi(i));
    return Field::from_coeffs(g, std::move(c)) + nonlinear_part(q, spec);
}

double stability_limit(const Field& q0, const FlowSpec& spec) {
    if (spec.kind == FlowKind::mass) return std::numeric_limits<double>::infinity();
    double a = q0.max_abs();
    double rate = 6 * a * a * q0.geometry().max_xi();
    if (spec.kind == FlowKind::difference) rate *= 2;
    return rate > 0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

Trajectory evolve(const Field& q0, const FlowSpec& spec) {
    if (!(spec.dt > 0)) throw Error(ErrorKind::invalid_argument, kMod, "dt must be positive");
    if (spec.save_every < 1) throw Error(ErrorKind::invalid_argument, kMod, "save_every must be >= 1");
    if (has_kappa(spec.kind) && !(spec.kappa >= 1.0))
        throw Error(ErrorKind::invalid_argument, kMod, "kappa flows need kappa >= 1");
    if (spec.enforce_stability) {
        double lim = stability_limit(q0, spec);
        if (spec.dt > lim)
            throw Error(ErrorKind::cfl_violation, kMod,
                        "dt = " + std::to_string(spec.dt) + " exceeds the stability limit " + std::to_string(lim));
    }
    const Geometry& g = q0.geometry();
    Trajectory tr;
    tr.mu = spec.mu;
    tr.probe_kappas = spec.probe_kappas;
    tr.times.push_back(0.0);
    tr.states.push_back(q0);
    tr.conserved_log.push_back(record(q0, spec));
    if (spec.t_final == 0.0) return tr;

    const long steps = std::max<long>(1, static_cast<long>(std::ceil(std::abs(spec.t_final) / spec.dt - 1e-9)));
    const double h = spec.t_final / steps;
    Stepper st(g, spec, h);
    Coeffs v = q0.coeffs();
    for (long s = 1; s <= steps; ++s) {
        Coeffs next;
        try {
            next = st.step(v);
        } catch (const Error& e) {
            throw EvolveError(ErrorKind::diagnostics_failure, std::string("step failed: ") + e.what(),
                              Field::from_coeffs(g, v), (s - 1) * h);
        }
        if (!finite(next))
            throw EvolveError(ErrorKind::non_finite, "non-finite state", Field::from_coeffs(g, v), (s - 1) * h);
        v.swap(next);
        if (s % spec.save_every == 0 || s == steps) {
            Field q = Field::from_coeffs(g, v);
            tr.times.push_back(s * h);
            tr.states.push_back(q);
            tr.conserved_log.push_back(record(q, spec));
        }
    }
    return tr;
}

Trajectory gauge_transform(const Trajectory& traj, Mu mu) {
    Trajectory out = traj;
    for (size_t i = 0; i < traj.states.size(); ++i) {
        const Field& v = traj.states[i];
        if (v.geometry().kind != GeometryKind::circle)
            throw Error(ErrorKind::invalid_argument, kMod, "the gauge transformation is defined on the circle");
        double m2 = i < traj.conserved_log.size() ? traj.conserved_log[i].mass : mass(v);
        out.states[i] = shift(v, 6 * sgn(mu) * traj.times[i] * 2 * m2);
    }
    return out;
}

REvolutionResidual r_evolution_residual(const Field& q, double kappa, double varkappa, Mu mu, FlowKind flow,
                                        double dt, DifferenceFrame frame, int cutoff) {
    if (flow != FlowKind::mkdv && flow != FlowKind::h_kappa)
        throw Error(ErrorKind::invalid_argument, kMod, "r-evolution laws exist for mkdv and h_kappa");
    if (flow == FlowKind::h_kappa && kappa == varkappa)
        throw Error(ErrorKind::invalid_argument, kMod, "h_kappa law needs kappa != varkappa");
    const Geometry& g = q.geometry();
    const double m = sgn(mu);
    GreensOptions o;
    o.cutoff = cutoff;
    auto rv = [&](const Field& f) { return greens_diagnostics(f, varkappa, mu, GreensMethod::direct, o); };

    FlowSpec spec;
    spec.kind = flow;
    spec.mu = mu;
    spec.kappa = flow == FlowKind::h_kappa ? kappa : 0.0;
    spec.dt = dt;
    spec.cutoff = cutoff;
    spec.enforce_stability = false;
    spec.t_final = dt;
    Field qp = evolve(q, spec).states.back();
    spec.t_final = -dt;
    Field qm = evolve(q, spec).states.back();

    auto d0 = rv(q);
    Field rp = rv(qp).r, rm = rv(qm).r;
    REvolutionResidual res;
    res.r_norm = d0.r.l2();

    // law: dr/dt = F(q); the frame removes the flow's own linear symbol,
    // which is also the linearisation of F
    Multiplier lam = [&spec](double xi) { return linear_symbol(spec, xi); };
    Field rhs;
    if (flow == FlowKind::mkdv) {
        Field dr = derivative(d0.r);
        rhs = -derivative(d0.r, 3) + product({&q, &q, &dr}) * (6 * m);
    } else {
        const double k2 = kappa * kappa;
        auto dk = greens_diagnostics(q, kappa, mu, GreensMethod::direct, o);
        Field one = Field::constant(g, 1.0);
        double coef = 8 * varkappa * k2 * k2 / (k2 - varkappa * varkappa);
        rhs = derivative(d0.r) * (4 * k2) +
              (product(d0.p, dk.gamma + one) - product(dk.p, d0.gamma + one)) * coef;
    }
    Field nonlin = rhs - apply_multiplier(d0.r, lam);
    Field fd;
    if (frame == DifferenceFrame::interaction) {
        Field rhop = apply_multiplier(rp, [&](double xi) { return std::exp(-dt * lam(xi)); });
        Field rhom = apply_multiplier(rm, [&](double xi) { return std::exp(dt * lam(xi)); });
        fd = (rhop - rhom) * (1.0 / (2 * dt));
        res.residual = (fd - nonlin).l2();
    } else {
        fd = (rp - rm) * (1.0 / (2 * dt));
        res.residual = (fd - rhs).l2();
    }
    return res;
}

double commuting_composition_check(const Field& q0, double kappa, Mu mu, double t, double dt, int cutoff) {
    if (t == 0.0) return 0.0;
    FlowSpec spec;
    spec.mu = mu;
    spec.dt = dt;
    spec.t_final = t;
    spec.cutoff = cutoff;
    spec.save_every = std::numeric_limits<int>::max();
    spec.kind = FlowKind::mkdv;
    Field direct = evolve(q0, spec).states.back();
    spec.kappa = kappa;
    spec.kind = FlowKind::h_kappa;
    Field mid = evolve(q0, spec).states.back();
    spec.kind = FlowKind::difference;
    Field composed = evolve(mid, spec).states.back();
    return (direct - composed).l2();
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

KappaSweep kappa_approximation_sweep(const Field& q0, double varkappa, Mu mu, double T,
                                     const std::vector<double>& kappas, double dt, int samples, int cutoff) {
    KappaSweep out;
    out.kappas = kappas;
    GreensOptions o;
    o.need_gamma = false;
    auto r_of = [&](const Field& f) { return greens_diagnostics(f, varkappa, mu, GreensMethod::direct, o).r; };
    const Field r0 = r_of(q0);
    for (double k : kappas) {
        if (!(k >= 2 * varkappa))
            throw Error(ErrorKind::invalid_argument, kMod, "sweep needs kappa >= 2 varkappa");
        double sup = 0.0;
        if (q0.l2() > 0.0 && T != 0.0) {
            for (double dir : {1.0, -1.0}) {
                FlowSpec spec;
                spec.kind = FlowKind::difference;
                spec.mu = mu;
                spec.kappa = k;
                spec.dt = dt;
                spec.t_final = dir * T;
                spec.cutoff = cutoff;
                long steps = static_cast<long>(std::ceil(std::abs(T) / dt - 1e-9));
                spec.save_every = std::max<long>(1, steps / std::max(1, samples));
                auto tr = evolve(q0, spec);
                for (const Field& q : tr.states) sup = std::max(sup, sobolev_norm(r_of(q) - r0, {2.0, 1.0}));
            }
        }
        out.sup_dist.push_back(sup);
    }
    out.strictly_decreasing = true;
    for (size_t i = 1; i < out.sup_dist.size(); ++i)
        if (!(out.sup_dist[i] < out.sup_dist[i - 1])) out.strictly_decreasing = false;
    bool positive = std::all_of(out.sup_dist.begin(), out.sup_dist.end(), [](double v) { return v > 0; });
    out.fitted_exponent = positive && out.kappas.size() > 1 ? fit_loglog_slope(out.kappas, out.sup_dist) : 0.0;
    return out;
}

}  // namespace cflow
