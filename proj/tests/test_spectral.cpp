#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cflow/initial_data.hpp"
#include "cflow/spectral.hpp"
#include "oracles.hpp"

using namespace cflow;
using std::numbers::pi;

namespace {

Field random_field(const Geometry& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n01;
    std::vector<double> s(g.n);
    for (auto& v : s) v = n01(rng);
    return Field::from_samples(g, s);
}

bool hermitian(const Field& f, double tol = 0.0) {
    const auto& c = f.coeffs();
    const int n = f.size();
    if (std::abs(c[0].imag()) > tol || std::abs(c[n / 2]) > tol) return false;
    for (int k = 1; k < n / 2; ++k)
        if (std::abs(c[k] - std::conj(c[n - k])) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("grid frequencies") {
    auto g = make_grid(GeometryKind::circle, 1.0, 64);
    CHECK(g.xi_of_k(1) == doctest::Approx(2 * pi));
    CHECK(g.wavenumber(63) == -1);
    CHECK(g.wavenumber(32) == 32);
    CHECK(g.max_xi() == doctest::Approx(2 * pi * 31));

    auto l = make_grid(GeometryKind::line_approx, 32.0, 256);
    CHECK(l.xi_of_k(1) == doctest::Approx(2 * pi / 32));
    CHECK(l.max_xi() == doctest::Approx(2 * pi / 32 * 127));
}

TEST_CASE("grid preconditions") {
    CHECK_THROWS_AS(make_grid(GeometryKind::circle, 2.0, 64), Error);
    CHECK_THROWS_AS(make_grid(GeometryKind::circle, 1.0, 63), Error);
    CHECK_THROWS_AS(make_grid(GeometryKind::circle, 1.0, 6), Error);
    CHECK_THROWS_AS(make_grid(GeometryKind::line_approx, 0.5, 64), Error);
    try {
        make_grid(GeometryKind::circle, 2.0, 64);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
        CHECK(e.module() == "spectral_core");
    }
}

TEST_CASE("samples and coefficients round trip") {
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 20, 128)}) {
        Field f = random_field(g, 7);
        // drop the Nyquist content so the round trip is exact
        Field band = Field::from_coeffs(g, f.coeffs());
        Field back = Field::from_samples(g, band.samples());
        double err = 0.0, scale = 0.0;
        for (int j = 0; j < g.n; ++j) {
            err = std::max(err, std::abs(back.samples()[j] - band.samples()[j]));
            scale = std::max(scale, std::abs(band.samples()[j]));
        }
        CHECK(err <= 1e-12 * scale);
        CHECK(hermitian(f));
    }
}

TEST_CASE("Nyquist mode is zeroed") {
    auto g = make_grid(GeometryKind::circle, 1, 16);
    std::vector<double> s(16);
    for (int j = 0; j < 16; ++j) s[j] = (j % 2 == 0) ? 1.0 : -1.0;
    Field f = Field::from_samples(g, s);
    CHECK(std::abs(f.coeffs()[8]) == 0.0);
    CHECK(f.max_abs() < 1e-14);
}

TEST_CASE("resolvent multiplier on one mode") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field f = cosine(g, 1.0, 1);
    Field got = apply_multiplier(f, mult::kappa_minus_inv(1.0));
    Field want = Field::from_function(g, [](double x) {
        return (std::cos(2 * pi * x) - 2 * pi * std::sin(2 * pi * x)) / (1 + 4 * pi * pi);
    });
    CHECK((got - want).l2() < 1e-14);
}

TEST_CASE("identity multiplier") {
    auto g = make_grid(GeometryKind::line_approx, 8, 64);
    Field f = random_field(g, 3);
    CHECK((apply_multiplier(f, mult::identity()) - f).l2() == 0.0);
}

TEST_CASE("w multiplier on one mode") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field f = cosine(g, 1.0, 1);
    const double w = 3 * 4 * pi * pi / (4 * (4 * pi * pi + 1) * (4 * pi * pi + 4));
    CHECK((apply_multiplier(f, mult::w(1.0)) - f * w).l2() < 1e-15);
}

TEST_CASE("singular and non-real multipliers are rejected") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    Field f = cosine(g, 1.0, 1);
    CHECK_THROWS_AS(mult::kappa_minus_inv(0.0), Error);
    // 1 / xi blows up at the zero mode
    try {
        apply_multiplier(f, [](double xi) { return cplx(1.0 / xi); });
        FAIL("expected a singular multiplier error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::singular_multiplier);
    }
    // e^{i} is not conjugate-symmetric in xi
    try {
        apply_multiplier(f, [](double) { return std::exp(cplx(0.0, 1.0)); });
        FAIL("expected a real-valuedness error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
    }
}

TEST_CASE("Sobolev norm examples") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    CHECK(sobolev_norm(Field::zero(g), {1.0, 1.0}) == 0.0);
    Field c = cosine(g, 1.0, 1);
    CHECK(sobolev_norm(c, {0.0, 3.0}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(sobolev_norm(c, {1.0, 1.0}) == doctest::Approx(std::sqrt((4 + 4 * pi * pi) / 2)).epsilon(1e-14));
}

TEST_CASE("Parseval against sample quadrature") {
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 24, 256)}) {
        Field f = Field::from_coeffs(g, random_field(g, 11).coeffs());
        std::vector<double> sq;
        for (double v : f.samples()) sq.push_back(v * v);
        double quad = std::sqrt(oracle::quad(sq, g.dx()));
        CHECK(std::abs(sobolev_norm(f, {0.0, 2.0}) - quad) <= 1e-10 * quad);
    }
}

TEST_CASE("multiplier composition is the identity on the band") {
    auto g = make_grid(GeometryKind::line_approx, 10, 128);
    Field f = random_field(g, 5);
    for (double k : {1.0, 3.0, 17.0}) {
        Field h = apply_multiplier(apply_multiplier(f, mult::kappa_minus(k)), mult::kappa_minus_inv(k));
        CHECK((h - f).l2() <= 1e-12 * f.l2());
    }
}

TEST_CASE("products") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field c = cosine(g, 1.0, 1);
    Field want = Field::constant(g, 0.5) + cosine(g, 0.5, 2);
    CHECK((product(c, c) - want).l2() < 1e-15);
    Field f = random_field(g, 2);
    CHECK((product(f, Field::constant(g, 1.0)) - Field::from_coeffs(g, f.coeffs())).l2() < 1e-13);
    CHECK(product(Field::zero(g), Field::zero(g)).l2() == 0.0);
}

TEST_CASE("padding removes aliasing of a cubic term") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    // cos^3(t) = (3 cos t + cos 3t) / 4 with 3k = 30 inside the band
    Field c = cosine(g, 1.0, 10);
    CHECK((cube(c) - (cosine(g, 0.75, 10) + cosine(g, 0.25, 30))).l2() < 1e-14);
    // 3k = 36 lies outside: the padded product drops it, the unpadded one aliases it to 28
    Field d = cosine(g, 1.0, 12);
    CHECK((cube(d) - cosine(g, 0.75, 12)).l2() < 1e-14);
    CHECK((cube(d, Dealias::none) - cosine(g, 0.75, 12)).l2() > 0.1);
}

TEST_CASE("operations keep fields real") {
    auto g = make_grid(GeometryKind::line_approx, 16, 64);
    for (unsigned seed = 0; seed < 10; ++seed) {
        Field f = random_field(g, seed), h = random_field(g, seed + 100);
        CHECK(hermitian(product(f, h), 1e-14));
        CHECK(hermitian(derivative(f, 3), 1e-10));
        CHECK(hermitian(apply_multiplier(f, mult::kappa_plus_inv(2.0)), 1e-15));
        CHECK(hermitian(shift(f, 0.37), 1e-14));
        CHECK(hermitian(f * 2.0 - h, 1e-14));
    }
}

TEST_CASE("shift moves the profile") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field f = cosine(g, 1.0, 1) + sine(g, 0.3, 3);
    Field want = Field::from_function(g, [](double x) {
        return std::cos(2 * pi * (x + 0.1)) + 0.3 * std::sin(6 * pi * (x + 0.1));
    });
    CHECK((shift(f, 0.1) - want).l2() < 1e-14);
}

TEST_CASE("mismatched grids are rejected") {
    Field a = Field::zero(make_grid(GeometryKind::circle, 1, 32));
    Field b = Field::zero(make_grid(GeometryKind::circle, 1, 64));
    try {
        (void)(a + b);
        FAIL("expected geometry mismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::geometry_mismatch);
    }
    CHECK_THROWS_AS(product(a, b), Error);
    CHECK_THROWS_AS(inner(a, b), Error);
}

TEST_CASE("integrals and inner products") {
    auto g = make_grid(GeometryKind::line_approx, 4, 64);
    Field f = Field::constant(g, 2.0) + cosine(g, 1.0, 3);
    CHECK(integral(f) == doctest::Approx(8.0).epsilon(1e-14));
    CHECK(inner(f, f) == doctest::Approx(4.0 * 4 + 0.5 * 4).epsilon(1e-14));
    auto c = make_grid(GeometryKind::circle, 1, 1024);
    CHECK(l1_norm(cosine(c, 1.0, 1)) == doctest::Approx(2 / pi).epsilon(1e-5));
}
