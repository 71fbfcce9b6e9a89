#include "naxray/quadrature.hpp"

#include <cmath>

#include "naxray/errors.hpp"
#include "naxray/types.hpp"

namespace naxray
{
QuadratureRule gauss_legendre(int n, double a, double b)
{
    if (n < 1)
        throw DomainError("gauss_legendre: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double half = 0.5 * (b - a);
    double mid = 0.5 * (b + a);
    for (int i = 0; i < (n + 1) / 2; ++i)
    {
        // Newton iteration from the Chebyshev-like initial guess
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it)
        {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k)
            {
                double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        double w = 2 / ((1 - z * z) * dp * dp);
        rule.nodes[i] = mid - half * z;
        rule.nodes[n - 1 - i] = mid + half * z;
        rule.weights[i] = rule.weights[n - 1 - i] = half * w;
    }
    return rule;
}

std::vector<double> simpson_weights(int n, double h)
{
    if (n < 0 || n % 2 != 0)
        throw DomainError("simpson_weights: interval count must be even");
    std::vector<double> w(n + 1, 0.0);
    if (n == 0)
        return w;
    for (int j = 0; j <= n; ++j)
    {
        double c = (j == 0 || j == n) ? 1 : (j % 2 == 1 ? 4 : 2);
        w[j] = c * h / 3;
    }
    return w;
}

double simpson(std::span<const double> values, double h)
{
    int n = static_cast<int>(values.size()) - 1;
    auto w = simpson_weights(n, h);
    double s = 0;
    for (int j = 0; j <= n; ++j)
        s += w[j] * values[j];
    return s;
}
}  // namespace naxray
