#pragma once

#include <algorithm>
#include <cmath>

namespace naxray::stats
{
template<class Cdf>
KsResult ks_one_sample(std::vector<double> x, Cdf&& cdf)
{
    std::sort(x.begin(), x.end());
    double n = static_cast<double>(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double f = cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    double sn = std::sqrt(n);
    return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}
}  // namespace naxray::stats
