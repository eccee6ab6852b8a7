#include <doctest.h>

#include <cmath>

#include "cflow/initial_data.hpp"
#include "cflow/inverse_map.hpp"

using namespace cflow;

TEST_CASE("forward map basics") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    CHECK(forward_r(Field::zero(g), 4.0, Mu::defocusing).l2() == 0.0);
    // linear part is (4 kappa^2 - d^2)^{-1}, with a cubic correction
    for (Mu mu : {Mu::defocusing, Mu::focusing}) {
        double err[2];
        for (int i = 0; i < 2; ++i) {
            Field q = cosine(g, i == 0 ? 0.02 : 0.01, 1);
            err[i] = (forward_r(q, 4.0, mu) - apply_multiplier(q, mult::helmholtz_inv(4.0))).l2();
        }
        CHECK(err[0] / err[1] == doctest::Approx(8.0).epsilon(0.02));
    }
}

TEST_CASE("forward map smooths by two derivatives") {
    auto g = make_grid(GeometryKind::circle, 1, 128);
    Field q = random_smooth(g, 13, 0.05, 2.0, 8.0);
    Field t = forward_r(q, 2.0, Mu::focusing);
    double tail = 0.0, all = 0.0;
    for (int i = 0; i < g.n; ++i) {
        double w = std::pow(4 * 4 + g.xi(i) * g.xi(i), 2.0) * std::norm(t.coeffs()[i]);
        all += w;
        if (std::abs(g.wavenumber(i)) > g.n / 3) tail += w;
    }
    CHECK(std::sqrt(tail / all) <= 1e-6);
}

TEST_CASE("zero target") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    auto rep = invert_r(Field::zero(g), 3.0, Mu::defocusing);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(rep.q_recovered.l2() == 0.0);
}

TEST_CASE("round trip from q") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = cosine(g, 0.1, 1);
    for (Mu mu : {Mu::defocusing, Mu::focusing}) {
        auto rep = invert_r(forward_r(q, 6.0, mu), 6.0, mu);
        CHECK(rep.converged);
        CHECK((rep.q_recovered - q).l2() <= 1e-10);
        CHECK(rep.final_residual <= 1e-10);
        for (size_t i = 1; i < rep.contraction_estimates.size(); ++i)
            CHECK(rep.contraction_estimates[i] < rep.contraction_estimates[i - 1]);
    }
}

TEST_CASE("round trips on a corpus") {
    for (auto g : {make_grid(GeometryKind::circle, 1, 64), make_grid(GeometryKind::line_approx, 16, 64)})
        for (double k : {2.0, 8.0}) {
            auto corpus = random_corpus(g, 99, 4, 0.05, k);
            for (Mu mu : {Mu::defocusing, Mu::focusing})
                for (const Field& q : corpus) {
                    auto rep = invert_r(forward_r(q, k, mu), k, mu, 1e-13);
                    CHECK((rep.q_recovered - q).l2() <= 1e-9 * q.l2());
                    Field t = apply_multiplier(q, mult::helmholtz_inv(k));
                    auto back = invert_r(t, k, mu, 1e-13);
                    Field t2 = forward_r(back.q_recovered, k, mu);
                    CHECK(sobolev_norm(t2 - t, {2.0, k}) <= 1e-9 * sobolev_norm(t, {2.0, k}));
                }
        }
}

TEST_CASE("inversion commutes with translation") {
    auto g = make_grid(GeometryKind::line_approx, 8, 64);
    Field q = random_smooth(g, 5, 0.05, 3.0);
    Field t = forward_r(q, 3.0, Mu::focusing);
    const double h = 1.3;
    // the residual floor on this coarse grid is about 1e-11
    Field a = invert_r(shift(t, h), 3.0, Mu::focusing, 1e-10).q_recovered;
    Field b = shift(invert_r(t, 3.0, Mu::focusing, 1e-10).q_recovered, h);
    CHECK((a - b).l2() <= 1e-10 * q.l2());
}

TEST_CASE("contraction improves with kappa") {
    auto g = make_grid(GeometryKind::circle, 1, 64);
    Field q = cosine(g, 0.3, 1) + sine(g, 0.2, 2);
    double prev = 1.0;
    for (double k : {2.0, 4.0, 8.0, 16.0}) {
        auto rep = invert_r(forward_r(q, k, Mu::defocusing), k, Mu::defocusing, 1e-12);
        const auto& c = rep.contraction_estimates;
        REQUIRE(c.size() >= 2);
        double factor = c[1] / c[0];
        CHECK(factor < prev);
        prev = factor;
    }
}

TEST_CASE("inversion failures are reported") {
    auto g = make_grid(GeometryKind::circle, 1, 32);
    Field big = apply_multiplier(cosine(g, 60.0, 1), mult::helmholtz_inv(1.0));
    bool reported = false;
    try {
        invert_r(big, 1.0, Mu::focusing, 1e-10, 30);
    } catch (const Error& e) {
        reported = e.kind() == ErrorKind::divergence || e.kind() == ErrorKind::max_iterations ||
                   e.kind() == ErrorKind::singular_operator;
        CHECK(e.module() == "inverse_map");
    }
    CHECK(reported);
    Field q = cosine(g, 0.1, 1);
    try {
        invert_r(forward_r(q, 2.0, Mu::defocusing), 2.0, Mu::defocusing, 1e-30, 3);
        FAIL("expected max_iterations");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::max_iterations);
    }
}
