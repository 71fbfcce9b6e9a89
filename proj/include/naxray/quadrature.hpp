#pragma once

#include <span>
#include <vector>

namespace naxray
{
struct QuadratureRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

//! Gauss-Legendre rule with n points on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

//! Composite Simpson weights for n (even) intervals of width h.
std::vector<double> simpson_weights(int n, double h);

//! Composite Simpson sum over n+1 equally spaced samples (n even).
double simpson(std::span<const double> values, double h);
}  // namespace naxray
