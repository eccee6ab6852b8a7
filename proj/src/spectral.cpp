#include "cflow/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace cflow {

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::geometry_mismatch: return "geometry_mismatch";
        case ErrorKind::singular_multiplier: return "singular_multiplier";
        case ErrorKind::singular_operator: return "singular_operator";
        case ErrorKind::series_divergence: return "series_divergence";
        case ErrorKind::outside_ball: return "outside_ball";
        case ErrorKind::log_branch: return "log_branch";
        case ErrorKind::cfl_violation: return "cfl_violation";
        case ErrorKind::diagnostics_failure: return "diagnostics_failure";
        case ErrorKind::non_finite: return "non_finite";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::max_iterations: return "max_iterations";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

namespace {

const char* kMod = "spectral_core";

// FFTW planning is not thread safe; execution with new arrays is.
struct PlanCache {
    std::mutex mu;
    std::map<std::pair<int, int>, fftw_plan> plans;

    fftw_plan get(int n, int sign) {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(n, sign);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        std::vector<cplx> a(n), b(n);
        fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans.emplace(key, p);
        return p;
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void execute(int n, int sign, const cplx* in, cplx* out) {
    fftw_plan p = cache().get(n, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void check_same(const Geometry& a, const Geometry& b) {
    if (!(a == b)) throw Error(ErrorKind::geometry_mismatch, kMod, "fields live on different grids");
}

}  // namespace

namespace fft {
void forward(int n, const cplx* in, cplx* out) { execute(n, FFTW_FORWARD, in, out); }
void backward(int n, const cplx* in, cplx* out) { execute(n, FFTW_BACKWARD, in, out); }
}  // namespace fft

double Geometry::xi_of_k(int k) const { return 2.0 * std::numbers::pi * k / period; }

Geometry make_grid(GeometryKind kind, double period, int n_modes) {
    if (n_modes < 8 || n_modes % 2 != 0)
        throw Error(ErrorKind::invalid_argument, kMod, "n_modes must be even and >= 8");
    if (!(period >= 1.0) || !std::isfinite(period))
        throw Error(ErrorKind::invalid_argument, kMod, "period must be >= 1");
    if (kind == GeometryKind::circle && period != 1.0)
        throw Error(ErrorKind::invalid_argument, kMod, "circle geometry requires period 1");
    return Geometry{kind, period, n_modes};
}

Field Field::zero(const Geometry& g) {
    Field f;
    f.g_ = g;
    f.s_.assign(g.n, 0.0);
    f.c_.assign(g.n, cplx(0.0));
    return f;
}

Field Field::constant(const Geometry& g, double c) {
    Field f = zero(g);
    std::fill(f.s_.begin(), f.s_.end(), c);
    f.c_[0] = c;
    return f;
}

Field Field::from_samples(const Geometry& g, const std::vector<double>& s) {
    if (static_cast<int>(s.size()) != g.n)
        throw Error(ErrorKind::invalid_argument, kMod, "sample count does not match grid");
    std::vector<cplx> in(s.begin(), s.end()), out(g.n);
    fft::forward(g.n, in.data(), out.data());
    for (auto& v : out) v /= g.n;
    return from_coeffs(g, std::move(out));
}

Field Field::from_coeffs(const Geometry& g, std::vector<cplx> c) {
    if (static_cast<int>(c.size()) != g.n)
        throw Error(ErrorKind::invalid_argument, kMod, "coefficient count does not match grid");
    const int n = g.n;
    c[n / 2] = 0.0;
    c[0] = c[0].real();
    for (int k = 1; k < n / 2; ++k) {
        cplx a = 0.5 * (c[k] + std::conj(c[n - k]));
        c[k] = a;
        c[n - k] = std::conj(a);
    }
    Field f;
    f.g_ = g;
    f.c_ = std::move(c);
    std::vector<cplx> out(n);
    fft::backward(n, f.c_.data(), out.data());
    f.s_.resize(n);
    for (int j = 0; j < n; ++j) f.s_[j] = out[j].real();
    return f;
}

Field Field::from_function(const Geometry& g, const std::function<double(double)>& fn) {
    std::vector<double> s(g.n);
    for (int j = 0; j < g.n; ++j) s[j] = fn(g.x(j));
    return from_samples(g, s);
}

cplx Field::coeff_k(int k) const {
    if (k <= -g_.n / 2 || k >= g_.n / 2) return 0.0;
    return c_[g_.slot(k)];
}

Field Field::operator+(const Field& o) const {
    check_same(g_, o.g_);
    Field r = *this;
    for (int i = 0; i < g_.n; ++i) {
        r.s_[i] += o.s_[i];
        r.c_[i] += o.c_[i];
    }
    return r;
}

Field Field::operator-(const Field& o) const {
    check_same(g_, o.g_);
    Field r = *this;
    for (int i = 0; i < g_.n; ++i) {
        r.s_[i] -= o.s_[i];
        r.c_[i] -= o.c_[i];
    }
    return r;
}

Field Field::operator-() const { return *this * -1.0; }

Field Field::operator*(double a) const {
    Field r = *this;
    for (auto& v : r.s_) v *= a;
    for (auto& v : r.c_) v *= a;
    return r;
}

double Field::max_abs() const {
    double m = 0.0;
    for (double v : s_) m = std::max(m, std::abs(v));
    return m;
}

double Field::l2() const { return sobolev_norm(*this, {0.0, 1.0}); }

namespace mult {
Multiplier identity() {
    return [](double) { return cplx(1.0); };
}
Multiplier derivative(int order) {
    return [order](double xi) { return std::pow(cplx(0.0, xi), order); };
}
Multiplier kappa_minus(double kappa) {
    return [kappa](double xi) { return cplx(kappa, -xi); };
}
Multiplier kappa_minus_inv(double kappa) {
    if (!(kappa > 0)) throw Error(ErrorKind::singular_multiplier, kMod, "(kappa - d)^{-1} needs kappa > 0");
    return [kappa](double xi) { return 1.0 / cplx(kappa, -xi); };
}
Multiplier kappa_plus_inv(double kappa) {
    if (!(kappa > 0)) throw Error(ErrorKind::singular_multiplier, kMod, "(kappa + d)^{-1} needs kappa > 0");
    return [kappa](double xi) { return 1.0 / cplx(kappa, xi); };
}
Multiplier helmholtz_inv(double kappa) {
    if (!(kappa > 0)) throw Error(ErrorKind::singular_multiplier, kMod, "(4kappa^2 - d^2)^{-1} needs kappa > 0");
    return [kappa](double xi) { return cplx(1.0 / (4 * kappa * kappa + xi * xi)); };
}
Multiplier w(double kappa) {
    return [kappa](double xi) {
        double k2 = kappa * kappa, x2 = xi * xi;
        return cplx(3 * k2 * x2 / (4 * (x2 + k2) * (x2 + 4 * k2)));
    };
}
Multiplier shift(double h) {
    return [h](double xi) { return std::exp(cplx(0.0, xi * h)); };
}
}  // namespace mult

Field apply_multiplier(const Field& f, const Multiplier& m) {
    const Geometry& g = f.geometry();
    std::vector<cplx> c = f.coeffs();
    for (int i = 0; i < g.n; ++i) {
        if (i == g.n / 2) continue;
        cplx v = m(g.xi(i));
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw Error(ErrorKind::singular_multiplier, kMod, "multiplier is singular on the frequency set");
        c[i] *= v;
    }
    for (int k = 1; k < g.n / 2; ++k) {
        cplx a = m(g.xi_of_k(k)), b = m(g.xi_of_k(-k));
        if (std::abs(a - std::conj(b)) > 1e-12 * (1.0 + std::abs(a)))
            throw Error(ErrorKind::invalid_argument, kMod, "multiplier does not preserve real-valuedness");
    }
    cplx m0 = m(0.0);
    if (std::abs(m0.imag()) > 1e-12 * (1.0 + std::abs(m0)))
        throw Error(ErrorKind::invalid_argument, kMod, "multiplier does not preserve real-valuedness");
    return Field::from_coeffs(g, std::move(c));
}

Field derivative(const Field& f, int order) { return apply_multiplier(f, mult::derivative(order)); }

Field shift(const Field& f, double h) { return apply_multiplier(f, mult::shift(h)); }

double sobolev_norm(const Field& f, SobolevIndex idx) {
    const Geometry& g = f.geometry();
    const double k4 = 4 * idx.kappa * idx.kappa;
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double xi = g.xi(i);
        acc += std::pow(k4 + xi * xi, idx.s) * std::norm(f.coeffs()[i]);
    }
    return std::sqrt(g.period * acc);
}

double inner(const Field& f, const Field& h) {
    check_same(f.geometry(), h.geometry());
    double acc = 0.0;
    for (int i = 0; i < f.size(); ++i) acc += (std::conj(f.coeffs()[i]) * h.coeffs()[i]).real();
    return f.geometry().period * acc;
}

double integral(const Field& f) { return f.geometry().period * f.mean(); }

double l1_norm(const Field& f) {
    double acc = 0.0;
    for (double v : f.samples()) acc += std::abs(v);
    return acc * f.geometry().dx();
}

Field product(const std::vector<const Field*>& fs, Dealias rule) {
    if (fs.empty()) throw Error(ErrorKind::invalid_argument, kMod, "empty product");
    const Geometry& g = fs.front()->geometry();
    for (auto* f : fs) check_same(g, f->geometry());
    const int n = g.n;
    if (rule == Dealias::none) {
        std::vector<double> s(n, 1.0);
        for (auto* f : fs)
            for (int j = 0; j < n; ++j) s[j] *= f->samples()[j];
        return Field::from_samples(g, s);
    }
    const int m = 2 * n;
    std::vector<cplx> acc(m, cplx(1.0)), pad(m), phys(m);
    for (auto* f : fs) {
        std::fill(pad.begin(), pad.end(), cplx(0.0));
        for (int k = -n / 2 + 1; k < n / 2; ++k) pad[k >= 0 ? k : k + m] = f->coeffs()[g.slot(k)];
        fft::backward(m, pad.data(), phys.data());
        for (int j = 0; j < m; ++j) acc[j] *= phys[j].real();
    }
    fft::forward(m, acc.data(), phys.data());
    std::vector<cplx> c(n, cplx(0.0));
    for (int k = -n / 2 + 1; k < n / 2; ++k) c[g.slot(k)] = phys[k >= 0 ? k : k + m] / double(m);
    return Field::from_coeffs(g, std::move(c));
}

Field product(const Field& f, const Field& h, Dealias rule) { return product({&f, &h}, rule); }

Field cube(const Field& f, Dealias rule) { return product({&f, &f, &f}, rule); }

}  // namespace cflow
