#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cflow/flows.hpp"
#include "cflow/initial_data.hpp"
#include "cflow/lax.hpp"
#include "oracles.hpp"

using namespace cflow;
using std::numbers::pi;

namespace {

Field q_mixed(const Geometry& g) { return cosine(g, 0.3, 1) + sine(g, 0.15, 2); }

double rel(const Field& a, const Field& b) { return (a - b).l2() / std::max(a.l2(), b.l2()); }

// fraction of the H^2 norm carried by |k| above two thirds of the band
double tail_fraction(const Field& f) {
    const auto& g = f.geometry();
    double tail = 0.0, all = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double w = std::pow(4 + g.xi(i) * g.xi(i), 2.0) * std::norm(f.coeffs()[i]);
        all += w;
        if (std::abs(g.wavenumber(i)) > g.n / 3) tail += w;
    }
    return std::sqrt(tail / all);
}

}  // namespace

TEST_CASE("Lax system matrices") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    auto zero = build_lax(Field::zero(g), 2.0, Mu::defocusing, 8);
    CHECK(zero.Q.norm() == 0.0);
    CHECK(zero.dim() == 17);

    auto s = build_lax(cosine(g, 1.0, 1), 3.0, Mu::focusing, 8);
    for (int a = 0; a < s.dim(); ++a) {
        CHECK(s.dminus(a) == cplx(1.0) / cplx(3.0, -s.xi[a]));
        CHECK(s.dplus(a) == cplx(1.0) / cplx(3.0, s.xi[a]));
        for (int b = 0; b < s.dim(); ++b) {
            double want = std::abs(a - b) == 1 ? 0.5 : 0.0;
            CHECK(std::abs(s.Q(a, b) - want) < 1e-15);
        }
    }
}

TEST_CASE("Lax system preconditions") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    CHECK_THROWS_AS(build_lax(Field::zero(g), 0.5, Mu::defocusing), Error);
    CHECK_THROWS_AS(build_lax(Field::zero(g), 2.0, Mu::defocusing, 17), Error);
}

TEST_CASE("Hilbert-Schmidt norm") {
    CHECK(hilbert_schmidt_norm(Eigen::MatrixXcd::Zero(5, 5)) == 0.0);
    CHECK(hilbert_schmidt_norm(Eigen::MatrixXcd::Identity(9, 9)) == doctest::Approx(3.0));
    // |T|_HS ~ kappa^{-1} |q|^2 for q = cos(2 pi x)
    auto g = make_grid(GeometryKind::circle, 1, 128);
    Field q = cosine(g, 1.0, 1);
    std::vector<double> ks{4, 8, 16, 32}, hs;
    for (double k : ks) hs.push_back(hilbert_schmidt_norm(t_operator(build_lax(q, k, Mu::defocusing))));
    double slope = fit_loglog_slope(ks, hs);
    CHECK(slope <= -0.9);
    CHECK(slope >= -1.5);
    for (size_t i = 0; i < ks.size(); ++i) CHECK(hs[i] <= 1.0 / ks[i] * q.l2() * q.l2());
}

TEST_CASE("lambda factor") {
    auto c = make_grid(GeometryKind::circle, 1, 32);
    auto l = make_grid(GeometryKind::line_approx, 16, 32);
    CHECK(lambda_factor(2.0, c) == doctest::Approx(0.761594).epsilon(1e-6));
    CHECK(lambda_factor(2.0, l) == 1.0);
    double prev = 0.0;
    for (double k = 1; k < 15; k *= 1.5) {
        double v = lambda_factor(k, c);
        CHECK(v > prev);
        CHECK(v < 1.0);
        prev = v;
    }
    CHECK_THROWS_AS(lambda_factor(0.9, c), Error);
}

TEST_CASE("zero potential gives zero diagnostics") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    for (auto m : {GreensMethod::direct, GreensMethod::series}) {
        auto d = greens_diagnostics(Field::zero(g), 3.0, Mu::defocusing, m);
        CHECK(d.gamma.l2() == 0.0);
        CHECK(d.p.l2() == 0.0);
        CHECK(d.r.l2() == 0.0);
    }
}

TEST_CASE("diagnostics agree with the Floquet Green's function") {
    // circle, and a short line period where the torus constants matter most; the
    // oracle loses e^{2 kappa P} through Phi Phi^{-1}, so kappa P stays small
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 2, 128)}) {
        Field q = q_mixed(g);
        auto ks = g.kind == GeometryKind::circle ? std::vector<double>{2.0, 4.0} : std::vector<double>{1.0, 2.0};
        for (double k : ks)
            for (Mu mu : {Mu::defocusing, Mu::focusing}) {
                auto o = oracle::floquet_greens(q, k, mu);
                auto d = greens_diagnostics(q, k, mu);
                double scale = oracle::max_abs(o.p);
                CHECK(oracle::max_abs_diff(o.gamma, d.gamma.samples()) <= 1e-9 * scale);
                CHECK(oracle::max_abs_diff(o.p, d.p.samples()) <= 1e-9 * scale);
                CHECK(oracle::max_abs_diff(o.r, d.r.samples()) <= 1e-9 * scale);
            }
    }
}

TEST_CASE("linearization at small amplitude") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    const double k = 4.0;
    for (Mu mu : {Mu::defocusing, Mu::focusing}) {
        double prev_p = 0, prev_r = 0;
        for (double eps : {2e-3, 1e-3}) {
            Field q = cosine(g, eps, 1);
            auto d = greens_diagnostics(q, k, mu);
            Field r_lin = apply_multiplier(q, mult::helmholtz_inv(k)) * (4 * sgn(mu) * k);
            double ep = (d.p - p1(q, k, mu)).l2(), er = (d.r - r_lin).l2();
            CHECK(ep <= 10 * eps * eps * eps);
            CHECK(er <= 10 * eps * eps * eps);
            if (prev_p > 0) {
                CHECK(prev_p / ep == doctest::Approx(8.0).epsilon(0.02));
                CHECK(prev_r / er == doctest::Approx(8.0).epsilon(0.02));
            }
            prev_p = ep;
            prev_r = er;
            CHECK((r1(q, k, mu) - r_lin).l2() < 1e-18);
        }
    }
}

TEST_CASE("constant potential gives constant diagnostics") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    Field q = Field::constant(g, 0.05);
    auto d = greens_diagnostics(q, 2.0, Mu::focusing);
    for (const Field* f : {&d.gamma, &d.p, &d.r}) CHECK((*f - Field::constant(g, f->mean())).l2() < 1e-15);
    CHECK(std::abs(d.r.mean()) > 0.0);
}

TEST_CASE("gamma2 on one mode") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = cosine(g, 1.0, 1);
    Field want = Field::from_function(g, [](double x) {
        double c = std::cos(2 * pi * x), s = std::sin(2 * pi * x);
        return -2 * (2 * c - 2 * pi * s) / (4 + 4 * pi * pi) * (2 * c + 2 * pi * s) / (4 + 4 * pi * pi);
    });
    CHECK((gamma2(q, 1.0, Mu::defocusing) - want).l2() < 1e-15);
    CHECK((gamma2(q, 1.0, Mu::focusing) + want).l2() < 1e-15);
    for (auto* fn : {&gamma2, &p1, &p3, &r1, &r3}) CHECK(fn(Field::zero(g), 2.0, Mu::defocusing).l2() == 0.0);
}

TEST_CASE("low-order pieces capture the expansion") {
    // gamma - gamma2_exact is quartic, p - p1 - p3 and r - r1 - r3 are quintic;
    // on the circle the torus constant is exactly 1
    auto g = make_grid(GeometryKind::circle, 1, 64);
    const double k = 3.0;
    for (Mu mu : {Mu::defocusing, Mu::focusing}) {
        double eg[2], ep[2], er[2];
        for (int i = 0; i < 2; ++i) {
            Field q = q_mixed(g) * (i == 0 ? 0.2 : 0.1);
            auto d = greens_diagnostics(q, k, mu);
            eg[i] = (d.gamma - gamma2_exact(q, k, mu)).l2();
            ep[i] = (d.p - p1(q, k, mu) - p3(q, k, mu)).l2();
            er[i] = (d.r - r1(q, k, mu) - r3(q, k, mu)).l2();
        }
        CHECK(eg[0] / eg[1] == doctest::Approx(16.0).epsilon(0.05));
        CHECK(ep[0] / ep[1] == doctest::Approx(32.0).epsilon(0.05));
        CHECK(er[0] / er[1] == doctest::Approx(32.0).epsilon(0.05));
    }
}

TEST_CASE("series and direct methods agree inside the ball") {
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 16, 256)}) {
        for (double k : {2.0, 8.0}) {
            auto corpus = random_corpus(g, 42, 5, 0.05, k);
            for (Mu mu : {Mu::defocusing, Mu::focusing})
                for (const Field& q : corpus) {
                    auto d = greens_diagnostics(q, k, mu, GreensMethod::direct);
                    auto s = greens_diagnostics(q, k, mu, GreensMethod::series);
                    SobolevIndex h1{1.0, k};
                    for (auto [a, b] : {std::pair{&d.gamma, &s.gamma}, {&d.p, &s.p}, {&d.r, &s.r}})
                        CHECK(sobolev_norm(*a - *b, h1) <= 1e-8 * sobolev_norm(*a, h1));
                    REQUIRE(s.series.has_value());
                    CHECK(s.series->converged);
                    CHECK(s.series->ball_check <= 0.05 + 1e-12);
                    CHECK(s.series->spectral_radius < 1.0);
                }
        }
    }
}

TEST_CASE("series terms decay geometrically") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = random_smooth(g, 9, 0.05, 4.0);
    auto s = greens_diagnostics(q, 4.0, Mu::defocusing, GreensMethod::series);
    const auto& t = s.series->terms;
    REQUIRE(t.size() >= 3);
    for (size_t i = 1; i < t.size(); ++i) CHECK(t[i] < t[i - 1]);
    CHECK(t.back() < 1e-14 * t.front() * 10);
}

TEST_CASE("series outside the ball is reported, not attempted") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = random_smooth(g, 1, 0.5, 2.0);
    CHECK(ball_check(q, 2.0) == doctest::Approx(0.5));
    try {
        greens_diagnostics(q, 2.0, Mu::defocusing, GreensMethod::series);
        FAIL("expected outside_ball");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::outside_ball);
        CHECK(e.module() == "lax_greens");
    }
    // direct method still works there
    CHECK_NOTHROW(greens_diagnostics(q, 2.0, Mu::defocusing, GreensMethod::direct));
}

TEST_CASE("series divergence is detected when the ball check is waived") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = cosine(g, 12.0, 1);
    GreensOptions o;
    o.enforce_ball = false;
    try {
        greens_diagnostics(q, 1.0, Mu::defocusing, GreensMethod::series, o);
        FAIL("expected series_divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::series_divergence);
    }
}

TEST_CASE("identities of the diagnostics") {
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 16, 256)}) {
        for (double k : {2.0, 4.0, 8.0}) {
            auto corpus = random_corpus(g, 5, 4, 0.05, k);
            for (Mu mu : {Mu::defocusing, Mu::focusing})
                for (const Field& q : corpus) {
                    auto res = identity_residuals(q, greens_diagnostics(q, k, mu), mu);
                    CHECK(res.gamma_prime <= 1e-8);
                    CHECK(res.p_prime <= 1e-8);
                    CHECK(res.r_prime <= 1e-8);
                    CHECK(res.r_consistency <= 1e-8);
                }
        }
    }
}

TEST_CASE("scaling of the diagnostics in kappa") {
    auto g = make_grid(GeometryKind::circle, 1, 256);
    Field q = q_mixed(g);
    std::vector<double> ks{4, 8, 16, 32}, gh1, g4, p5;
    for (double k : ks) {
        auto d = greens_diagnostics(q, k, Mu::defocusing);
        auto rem = remainders(q, d, Mu::defocusing);
        gh1.push_back(sobolev_norm(d.gamma, {1.0, k}));
        g4.push_back(l1_norm(rem.gamma_ge4));
        p5.push_back(sobolev_norm(rem.p_ge5, {1.0, k}));
    }
    CHECK(fit_loglog_slope(ks, gh1) <= -0.4);
    CHECK(fit_loglog_slope(ks, g4) <= -2.5);
    CHECK(fit_loglog_slope(ks, p5) <= -1.5);
}

TEST_CASE("r is two derivatives smoother than q") {
    auto g = make_grid(GeometryKind::circle, 1, 128);
    Field q = random_smooth(g, 4, 0.05, 2.0, 8.0);
    auto d = greens_diagnostics(q, 2.0, Mu::defocusing);
    CHECK(tail_fraction(d.r) <= 1e-6);
}

TEST_CASE("translation covariance of the diagnostics") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = random_smooth(g, 8, 0.05, 3.0);
    const double h = 5 * g.dx();
    auto a = greens_diagnostics(shift(q, h), 3.0, Mu::focusing);
    auto b = greens_diagnostics(q, 3.0, Mu::focusing);
    CHECK(rel(a.gamma, shift(b.gamma, h)) < 1e-12);
    CHECK(rel(a.r, shift(b.r, h)) < 1e-12);
}

TEST_CASE("direct solve reports its conditioning") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    auto d = greens_diagnostics(cosine(g, 0.1, 1), 2.0, Mu::defocusing);
    CHECK(d.condition >= 1.0);
    CHECK(std::isfinite(d.condition));
}
