#include "cflow/initial_data.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cflow {

Field cosine(const Geometry& g, double a, int k) {
    const double w = g.xi_of_k(k);
    return Field::from_function(g, [=](double x) { return a * std::cos(w * x); });
}

Field sine(const Geometry& g, double a, int k) {
    const double w = g.xi_of_k(k);
    return Field::from_function(g, [=](double x) { return a * std::sin(w * x); });
}

Field soliton(const Geometry& g, double c, double x0) {
    if (!(c > 0)) throw Error(ErrorKind::invalid_argument, "initial_data", "soliton speed must be positive");
    const double s = std::sqrt(c), p = g.period;
    return Field::from_function(g, [=](double x) {
        double d = x - x0;
        d -= p * std::round(d / p);
        return s / std::cosh(s * d);
    });
}

Field random_smooth(const Geometry& g, std::uint64_t seed, double radius, double kappa, double decay) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<cplx> c(g.n, cplx(0.0));
    c[0] = gauss(rng);
    for (int k = 1; k < g.n / 2; ++k) {
        double damp = std::pow(1.0 + k, -decay);
        double re = gauss(rng), im = gauss(rng);
        c[k] = damp * cplx(re, im);
        c[g.n - k] = std::conj(c[k]);
    }
    Field f = Field::from_coeffs(g, std::move(c));
    double norm = f.l2();
    return f * (radius * std::sqrt(kappa) / norm);
}

std::vector<Field> random_corpus(const Geometry& g, std::uint64_t seed, int n, double delta, double kappa,
                                 double decay) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.25, 1.0);
    std::vector<Field> out;
    for (int i = 0; i < n; ++i) {
        double rad = delta * u(rng);
        std::uint64_t s = rng();
        out.push_back(random_smooth(g, s, rad, kappa, decay));
    }
    return out;
}

}  // namespace cflow
