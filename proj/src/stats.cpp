#include "naxray/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "naxray/errors.hpp"

namespace naxray::stats
{
double mean(std::span<const double> x)
{
    if (x.empty())
        throw DomainError("mean of empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

double variance(std::span<const double> x)
{
    if (x.size() < 2)
        throw DomainError("variance needs two samples");
    double mu = mean(x);
    double s = 0;
    for (double v : x)
        s += (v - mu) * (v - mu);
    return s / (x.size() - 1);
}

double median(std::vector<double> x)
{
    if (x.empty())
        throw DomainError("median of empty sample");
    std::sort(x.begin(), x.end());
    std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

std::vector<double> ranks(std::span<const double> x)
{
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();)
    {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]])
            ++j;
        double avg = 0.5 * (i + j) + 1;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("pearson: need two equal-length samples of size >= 2");
    double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y)
{
    auto rx = ranks(x);
    auto ry = ranks(y);
    return pearson(rx, ry);
}

double kolmogorov_q(double lambda)
{
    if (lambda < 1e-3)
        return 1.0;
    double s = 0;
    for (int k = 1; k <= 200; ++k)
    {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-18)
            break;
    }
    return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> x, std::vector<double> y)
{
    if (x.empty() || y.empty())
        throw DomainError("ks_two_sample: empty sample");
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double nx = x.size(), ny = y.size();
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < x.size() && j < y.size())
    {
        double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t)
            ++i;
        while (j < y.size() && y[j] <= t)
            ++j;
        d = std::max(d, std::abs(i / nx - j / ny));
    }
    double ne = std::sqrt(nx * ny / (nx + ny));
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}
}  // namespace naxray::stats
