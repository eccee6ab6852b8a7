#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cflow/spectral.hpp"

namespace cflow {

Field cosine(const Geometry& g, double a, int k);
Field sine(const Geometry& g, double a, int k);

// sqrt(c) sech(sqrt(c)(x - x0)), wrapped to the nearest periodic image
Field soliton(const Geometry& g, double c, double x0);

// Seeded Gaussian Fourier coefficients damped by (1 + |k|)^{-decay}, rescaled
// so that kappa^{-1/2} ||q|| = radius.
Field random_smooth(const Geometry& g, std::uint64_t seed, double radius, double kappa, double decay = 4.0);

// n samples with kappa^{-1/2} ||q|| = delta * U(0.25, 1)
std::vector<Field> random_corpus(const Geometry& g, std::uint64_t seed, int n, double delta, double kappa,
                                 double decay = 4.0);

}  // namespace cflow
