#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "cflow/error.hpp"

namespace cflow {

using cplx = std::complex<double>;

enum class GeometryKind { circle, line_approx };

struct Geometry {
    GeometryKind kind = GeometryKind::circle;
    double period = 1.0;
    int n = 64;

    // signed wavenumber of FFT slot i; the Nyquist slot maps to n/2
    int wavenumber(int i) const { return i <= n / 2 ? i : i - n; }
    int slot(int k) const { return k >= 0 ? k : k + n; }
    double xi_of_k(int k) const;
    double xi(int i) const { return xi_of_k(wavenumber(i)); }
    double x(int j) const { return period * j / n; }
    double dx() const { return period / n; }
    double max_xi() const { return xi_of_k(n / 2 - 1); }

    bool operator==(const Geometry& o) const {
        return kind == o.kind && period == o.period && n == o.n;
    }
};

Geometry make_grid(GeometryKind kind, double period, int n_modes);

// Real field on a periodic grid. Coefficients are the canonical data:
// c_k = (1/N) sum_j f(x_j) e^{-i xi_k x_j}, Nyquist zeroed, Hermitian.
class Field {
public:
    Field() = default;
    static Field zero(const Geometry& g);
    static Field constant(const Geometry& g, double c);
    static Field from_samples(const Geometry& g, const std::vector<double>& s);
    static Field from_coeffs(const Geometry& g, std::vector<cplx> c);
    static Field from_function(const Geometry& g, const std::function<double(double)>& f);

    const Geometry& geometry() const { return g_; }
    const std::vector<double>& samples() const { return s_; }
    const std::vector<cplx>& coeffs() const { return c_; }
    int size() const { return g_.n; }
    cplx coeff_k(int k) const;  // zero outside |k| < n/2

    Field operator+(const Field& o) const;
    Field operator-(const Field& o) const;
    Field operator-() const;
    Field operator*(double a) const;
    friend Field operator*(double a, const Field& f) { return f * a; }

    double mean() const { return c_.empty() ? 0.0 : c_[0].real(); }
    double max_abs() const;
    double l2() const;  // sqrt(period * sum |c_k|^2)

private:
    Geometry g_;
    std::vector<double> s_;
    std::vector<cplx> c_;
};

// Fourier multiplier m(xi); must satisfy m(-xi) = conj(m(xi)) to keep fields real.
using Multiplier = std::function<cplx(double)>;

namespace mult {
Multiplier identity();
Multiplier derivative(int order = 1);
Multiplier kappa_minus(double kappa);      // (kappa - d)
Multiplier kappa_minus_inv(double kappa);  // (kappa - d)^{-1}
Multiplier kappa_plus_inv(double kappa);   // (kappa + d)^{-1}
Multiplier helmholtz_inv(double kappa);    // (4 kappa^2 - d^2)^{-1}
Multiplier w(double kappa);
Multiplier shift(double h);                // f(x) -> f(x + h)
}  // namespace mult

Field apply_multiplier(const Field& f, const Multiplier& m);
Field derivative(const Field& f, int order = 1);
Field shift(const Field& f, double h);

struct SobolevIndex {
    double s = 0.0;
    double kappa = 1.0;
};

double sobolev_norm(const Field& f, SobolevIndex idx);
double inner(const Field& f, const Field& g);     // integral of f g
double integral(const Field& f);
double l1_norm(const Field& f);  // quadrature of |f| on the grid

enum class Dealias { pad2, none };

// Pointwise product of any number of fields, evaluated on a grid padded by
// the dealias factor and truncated back. One padded evaluation per call, so
// cubic terms are exact for band-limited inputs.
Field product(const std::vector<const Field*>& fs, Dealias rule = Dealias::pad2);
Field product(const Field& f, const Field& g, Dealias rule = Dealias::pad2);
Field cube(const Field& f, Dealias rule = Dealias::pad2);

namespace fft {
// unnormalised forward/backward complex transforms of length n
void forward(int n, const cplx* in, cplx* out);
void backward(int n, const cplx* in, cplx* out);
}  // namespace fft

}  // namespace cflow
