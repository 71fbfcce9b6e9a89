#pragma once

#include <span>
#include <vector>

namespace naxray::stats
{
double mean(std::span<const double> x);
//! Unbiased sample variance.
double variance(std::span<const double> x);
double median(std::vector<double> x);

//! Average ranks (ties share the mean rank), 1-based.
std::vector<double> ranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

//! Asymptotic Kolmogorov survival function Q_KS(lambda).
double kolmogorov_q(double lambda);

struct KsResult
{
    double statistic;
    double p_value;
};

//! One-sample KS test against a continuous cdf.
template<class Cdf>
KsResult ks_one_sample(std::vector<double> x, Cdf&& cdf);

KsResult ks_two_sample(std::vector<double> x, std::vector<double> y);

//! Standard normal cdf.
double normal_cdf(double x);
}  // namespace naxray::stats

#include "stats.inl"
