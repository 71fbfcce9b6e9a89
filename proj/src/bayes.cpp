#include "naxray/bayes.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "naxray/errors.hpp"
#include "naxray/parallel.hpp"

namespace naxray
{
namespace
{
double const kLog2Pi = std::log(2 * kPi);

using RSmall = SmallMat<double>;

// Backward RK4 for real A = sum_b vals(row, b) basis[b], rows at half nodes
// starting at `first`; returns U(0). Fixed sizes for the common m.
template<int M>
Eigen::Matrix<double, M, M> rk4_fixed(RMat const& vals, Eigen::Index first, std::vector<RMat> const& basis,
                                      int n_steps, double h)
{
    using Mat = Eigen::Matrix<double, M, M>;
    int const g = static_cast<int>(basis.size());
    std::array<Mat, M * M> fixed;
    for (int b = 0; b < g; ++b)
        fixed[b] = basis[b];
    auto a_at = [&](int j) {
        Mat a = Mat::Zero();
        for (int b = 0; b < g; ++b)
            a += vals(first + j, b) * fixed[b];
        return a;
    };
    Mat u = Mat::Identity();
    Mat a0 = a_at(2 * n_steps);
    for (int j = n_steps; j >= 1; --j)
    {
        Mat am = a_at(2 * j - 1);
        Mat a1 = a_at(2 * j - 2);
        Mat k1 = a0 * u;
        Mat k2 = am * (u + 0.5 * h * k1);
        Mat k3 = am * (u + 0.5 * h * k2);
        Mat k4 = a1 * (u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        a0 = a1;
    }
    return u;
}

RSmall rk4_real(RMat const& vals, Eigen::Index first, std::vector<RMat> const& basis, int m, int n_steps, double h)
{
    switch (m)
    {
        case 1: return rk4_fixed<1>(vals, first, basis, n_steps, h);
        case 2: return rk4_fixed<2>(vals, first, basis, n_steps, h);
        case 3: return rk4_fixed<3>(vals, first, basis, n_steps, h);
        case 4: return rk4_fixed<4>(vals, first, basis, n_steps, h);
        default: break;
    }
    int const g = static_cast<int>(basis.size());
    auto a_at = [&](int j) {
        RSmall a = RSmall::Zero(m, m);
        for (int b = 0; b < g; ++b)
            a += vals(first + j, b) * basis[b];
        return a;
    };
    RSmall u = RSmall::Identity(m, m);
    for (int j = n_steps; j >= 1; --j)
    {
        RSmall a0 = a_at(2 * j), am = a_at(2 * j - 1), a1 = a_at(2 * j - 2);
        RSmall k1 = a0 * u;
        RSmall k2 = am * (u + 0.5 * h * k1);
        RSmall k3 = am * (u + 0.5 * h * k2);
        RSmall k4 = a1 * (u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}
}  // namespace

void PriorSpec::validate() const
{
    if (d < 1 || m < 1 || modes < 1)
        throw DomainError("prior needs d, m, modes >= 1");
    if (!(alpha > 0.5 * d))
        throw DomainError("prior regularity alpha must exceed d/2");
    if (!(L > 1))
        throw DomainError("prior box half-width must exceed 1");
    if (!(amplitude >= 0))
        throw DomainError("prior amplitude must be nonnegative");
    if (structure != Structure::skew_symmetric && structure != Structure::general_real)
        throw DomainError("prior structure must be skew-symmetric or general-real");
}

int PriorSpec::lie_dim() const
{
    return structure == Structure::skew_symmetric ? m * (m - 1) / 2 : m * m;
}

std::vector<RMat> lie_basis(int m, Structure s)
{
    std::vector<RMat> out;
    if (s == Structure::skew_symmetric)
    {
        double const r = 1.0 / std::sqrt(2.0);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
            {
                RMat b = RMat::Zero(m, m);
                b(i, j) = r;
                b(j, i) = -r;
                out.push_back(b);
            }
        return out;
    }
    if (s == Structure::general_real)
    {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
            {
                RMat b = RMat::Zero(m, m);
                b(i, j) = 1.0;
                out.push_back(b);
            }
        return out;
    }
    throw DomainError("Lie basis available for skew-symmetric and general-real only");
}

Vec lie_coordinates(CMat const& a, std::vector<RMat> const& basis)
{
    Vec y(static_cast<Eigen::Index>(basis.size()));
    RMat re = a.real();
    for (std::size_t k = 0; k < basis.size(); ++k)
        y[static_cast<Eigen::Index>(k)] = (basis[k].array() * re.array()).sum();
    return y;
}

double scale_for_n(PriorSpec const& spec, double n)
{
    if (!(n >= 1))
        throw DomainError("scale_for_n needs n >= 1");
    return std::pow(n, -static_cast<double>(spec.d) / (4 * spec.alpha + 2 * spec.d));
}

//---------------------------------------------------------------------------//

PriorModel::PriorModel(PriorSpec spec) : spec_(spec)
{
    spec_.validate();
    basis_ = lie_basis(spec_.m, spec_.structure);
    PotentialField shape(spec_.d, 1, spec_.modes, spec_.L, Structure::general_real);
    std::vector<int> idx(spec_.d);
    double const base = kPi / spec_.L;
    for (std::size_t q = 0; q < shape.mode_count(); ++q)
    {
        std::size_t p = shape.mirror(q);
        if (p == PotentialField::npos || p < q)
            continue;  // unpaired, or the partner already holds the pair
        shape.unflatten(q, idx);
        std::vector<double> freq(spec_.d);
        double k2 = 0;
        for (int a = 0; a < spec_.d; ++a)
        {
            freq[a] = base * shape.frequency(idx[a]);
            k2 += freq[a] * freq[a];
        }
        double sigma = spec_.amplitude * std::pow(1.0 + k2, -0.5 * spec_.alpha);
        if (p == q)
            cols_.push_back({Kind::dc, q, p, freq, sigma});
        else
        {
            cols_.push_back({Kind::cosine, q, p, freq, sigma});
            cols_.push_back({Kind::sine, q, p, freq, sigma});
        }
    }
}

PotentialField PriorModel::to_field(std::span<double const> theta, double scale) const
{
    if (theta.size() != dim())
        throw DomainError("parameter vector has the wrong length");
    int const m = spec_.m;
    PotentialField f(spec_.d, m, spec_.modes, spec_.L, spec_.structure);
    double const r2 = 1.0 / std::sqrt(2.0);
    std::size_t const nc = cols_.size();
    for (std::size_t b = 0; b < basis_.size(); ++b)
    {
        RMat const& B = basis_[b];
        for (std::size_t c = 0; c < nc; ++c)
        {
            Column const& col = cols_[c];
            double t = scale * col.sigma * theta[b * nc + c];
            cplx ck;
            if (col.kind == Kind::dc)
                ck = t;
            else if (col.kind == Kind::cosine)
                ck = cplx(r2 * t, 0);
            else
                ck = cplx(0, r2 * t);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                {
                    if (B(i, j) == 0.0)
                        continue;
                    f.coeff(col.mode, i, j) += ck * B(i, j);
                    if (col.kind != Kind::dc)
                        f.coeff(col.mirror, i, j) += std::conj(ck) * B(i, j);
                }
        }
    }
    return f;
}

Vec PriorModel::draw(Rng& rng) const
{
    Vec theta(static_cast<Eigen::Index>(dim()));
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        theta[i] = rng.normal();
    return theta;
}

void PriorModel::basis_functions(double const* x, double* out) const
{
    double const r = std::sqrt(2.0);
    for (std::size_t c = 0; c < cols_.size(); ++c)
    {
        Column const& col = cols_[c];
        if (col.kind == Kind::dc)
        {
            out[c] = col.sigma;
            continue;
        }
        double ph = 0;
        for (int a = 0; a < spec_.d; ++a)
            ph += col.freq[a] * x[a];
        out[c] = col.kind == Kind::cosine ? r * col.sigma * std::cos(ph) : -r * col.sigma * std::sin(ph);
    }
}

double PriorModel::pointwise_variance() const
{
    double s = 0;
    for (auto const& col : cols_)
        s += col.sigma * col.sigma;
    return s;
}

PotentialField sample_prior(PriorSpec const& spec, Rng& rng)
{
    PriorModel model(spec);
    Vec theta = model.draw(rng);
    return model.to_field(std::span<double const>(theta.data(), theta.size()));
}

//---------------------------------------------------------------------------//

Dataset simulate_dataset(PotentialField const& phi0, std::size_t n, Rng& rng, SolverConfig const& cfg,
                         std::string truth_id)
{
    if (phi0.structure() != Structure::skew_symmetric && phi0.structure() != Structure::general_real)
        throw DomainError("simulate_dataset: truth must be skew-symmetric or general-real");
    Dataset ds;
    ds.m = phi0.matrix_size();
    ds.structure = phi0.structure();
    ds.truth_id = std::move(truth_id);
    auto basis = lie_basis(ds.m, ds.structure);
    auto bds = sample_boundary_uniform(phi0.dim(), n, rng);
    auto recs = scattering_data(phi0, bds, cfg);
    ds.records.reserve(n);
    for (auto const& r : recs)
    {
        Vec y = lie_coordinates(r.value, basis);
        for (Eigen::Index k = 0; k < y.size(); ++k)
            y[k] += rng.normal();
        ds.records.push_back({r.bd, y});
    }
    return ds;
}

double log_likelihood(PotentialField const& phi, Dataset const& ds, SolverConfig const& cfg)
{
    if (ds.records.empty())
        return 0.0;
    if (phi.matrix_size() != ds.m)
        throw DomainError("log_likelihood: matrix sizes differ");
    auto basis = lie_basis(ds.m, ds.structure);
    double const dim_g = static_cast<double>(basis.size());
    std::vector<double> terms(ds.records.size());
    parallel_for(ds.records.size(), [&](std::size_t i) {
        auto const& r = ds.records[i];
        Vec c = lie_coordinates(scattering_value(phi, r.bd, cfg), basis);
        terms[i] = -0.5 * (c - r.y).squaredNorm() - 0.5 * dim_g * kLog2Pi;
    });
    double s = 0;
    for (double t : terms)
        s += t;
    return s;
}

//---------------------------------------------------------------------------//

LikelihoodCache::LikelihoodCache(PriorModel const& model, Dataset const& ds, SolverConfig const& cfg)
    : model_(model), ds_(ds)
{
    cfg.validate();
    if (ds.m != model.spec().m || ds.structure != model.spec().structure)
        throw DomainError("likelihood cache: dataset and prior disagree on the Lie algebra");
    chords_.resize(ds.records.size());
    int const cols = model.per_component();
    Eigen::Index rows = 0;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
    {
        auto const& bd = ds.records[i].bd;
        auto seg = GeodesicSegment::chord(bd.x, bd.v, cfg.steps_per_unit);
        chords_[i] = {seg.n_steps, seg.step(), rows};
        if (seg.n_steps > 0)
            rows += 2 * seg.n_steps + 1;
    }
    basis_.resize(rows, cols);
    parallel_for(ds.records.size(), [&](std::size_t i) {
        auto const& bd = ds.records[i].bd;
        Chord const& ch = chords_[i];
        std::vector<double> row(cols);
        auto seg = GeodesicSegment::chord(bd.x, bd.v, cfg.steps_per_unit);
        for (int j = 0; ch.n_steps > 0 && j <= 2 * ch.n_steps; ++j)
        {
            Vec p = seg.point(0.5 * j * ch.h);
            model.basis_functions(p.data(), row.data());
            for (int c = 0; c < cols; ++c)
                basis_(ch.offset + j, c) = row[c];
        }
    });
}

double LikelihoodCache::operator()(std::span<double const> theta, double scale) const
{
    if (ds_.records.empty())
        return 0.0;
    int const m = model_.spec().m;
    int const g = model_.lie_dim();
    int const cols = model_.per_component();
    RMat big_theta(cols, g);
    for (int b = 0; b < g; ++b)
        for (int c = 0; c < cols; ++c)
            big_theta(c, b) = scale * theta[static_cast<std::size_t>(b) * cols + c];
    auto const& basis = model_.basis();
    double const dim_g = static_cast<double>(g);
    RMat vals = basis_ * big_theta;  // all half nodes x g
    std::vector<double> terms(chords_.size());
    parallel_for(chords_.size(), [&](std::size_t i) {
        Chord const& ch = chords_[i];
        RSmall u = RSmall::Identity(m, m);
        if (ch.n_steps > 0)
            u = rk4_real(vals, ch.offset, basis, m, ch.n_steps, ch.h);
        double r2 = 0;
        Vec const& y = ds_.records[i].y;
        for (int b = 0; b < g; ++b)
        {
            double c = (basis[b].array() * u.array()).sum();
            r2 += (c - y[b]) * (c - y[b]);
        }
        terms[i] = -0.5 * r2 - 0.5 * dim_g * kLog2Pi;
    });
    double s = 0;
    for (double t : terms)
        s += t;
    return s;
}

//---------------------------------------------------------------------------//

void ChainConfig::validate() const
{
    if (!(beta > 0 && beta <= 1))
        throw DomainError("pCN beta must lie in (0, 1]");
    if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
        throw DomainError("chain needs 0 <= burn_in < n_iter");
    if (thin < 1)
        throw DomainError("thin must be >= 1");
    if (!(target_accept > 0 && target_accept < 1))
        throw DomainError("target acceptance must lie in (0, 1)");
}

ChainResult pcn_chain(ChainConfig const& cfg, PriorModel const& model, double scale, Dataset const& ds,
                      SolverConfig const& solver)
{
    cfg.validate();
    LikelihoodCache loglik(model, ds, solver);
    Rng rng(cfg.seed);
    std::size_t const dim = model.dim();
    Vec theta = cfg.start_at_zero ? Vec::Zero(static_cast<Eigen::Index>(dim)) : model.draw(rng);
    auto span_of = [](Vec const& v) { return std::span<double const>(v.data(), static_cast<std::size_t>(v.size())); };
    double ll = loglik(span_of(theta), scale);
    double beta = cfg.beta;
    double log_beta = std::log(beta);
    ChainResult out;
    out.scale = scale;
    std::size_t accepted = 0, counted = 0;
    Vec prop(static_cast<Eigen::Index>(dim));
    for (int it = 0; it < cfg.n_iter; ++it)
    {
        double rho = std::sqrt(1.0 - beta * beta);
        for (std::size_t i = 0; i < dim; ++i)
            prop[i] = rho * theta[i] + beta * rng.normal();
        double ll_prop = loglik(span_of(prop), scale);
        double log_u = std::log(rng.uniform());
        bool accept = log_u < ll_prop - ll;
        if (accept)
        {
            theta.swap(prop);
            ll = ll_prop;
        }
        if (it < cfg.burn_in)
        {
            if (cfg.adapt)
            {
                double gain = 1.0 / std::pow(it + 1.0, 0.6);
                log_beta += gain * ((accept ? 1.0 : 0.0) - cfg.target_accept);
                log_beta = std::clamp(log_beta, std::log(1e-4), 0.0);
                beta = std::exp(log_beta);
            }
            continue;
        }
        ++counted;
        accepted += accept ? 1 : 0;
        out.loglik_trace.push_back(ll);
        if ((it - cfg.burn_in) % cfg.thin == 0)
            out.samples.emplace_back(theta.data(), theta.data() + theta.size());
    }
    out.acceptance_rate = counted ? static_cast<double>(accepted) / counted : 0.0;
    out.beta = beta;
    return out;
}

//---------------------------------------------------------------------------//

PotentialField posterior_mean(std::span<PotentialField const> samples)
{
    if (samples.empty())
        throw DomainError("posterior_mean needs at least one sample");
    PotentialField mean = samples.front();
    for (std::size_t i = 1; i < samples.size(); ++i)
        mean += samples[i];
    mean *= cplx(1.0 / samples.size(), 0.0);
    mean.set_structure(samples.front().structure());
    return mean;
}

double effective_sample_size(std::span<double const> trace)
{
    std::size_t n = trace.size();
    if (n < 4)
        return static_cast<double>(n);
    double mean = 0;
    for (double x : trace)
        mean += x;
    mean /= n;
    double c0 = 0;
    for (double x : trace)
        c0 += (x - mean) * (x - mean);
    c0 /= n;
    if (!(c0 > 0))
        return static_cast<double>(n);
    auto acf = [&](std::size_t lag) {
        double s = 0;
        for (std::size_t i = 0; i + lag < n; ++i)
            s += (trace[i] - mean) * (trace[i + lag] - mean);
        return s / n / c0;
    };
    double tau = 1.0;
    for (std::size_t lag = 1; lag + 1 < n; lag += 2)
    {
        double pair = acf(lag) + acf(lag + 1);
        if (pair <= 0)
            break;
        tau += 2 * pair;
    }
    return n / tau;
}

PosteriorSummary summarize(ChainResult const& chain, PriorModel const& model, PotentialField const* truth)
{
    if (chain.samples.empty())
        throw DomainError("summarize needs at least one sample");
    std::vector<double> mean(model.dim(), 0.0);
    for (auto const& s : chain.samples)
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean[i] += s[i];
    for (double& x : mean)
        x /= chain.samples.size();
    PosteriorSummary out;
    out.mean_field = model.to_field(mean, chain.scale);
    out.acceptance_rate = chain.acceptance_rate;
    out.ess_proxy = effective_sample_size(chain.loglik_trace);
    if (truth)
        out.l2_error_vs_truth = l2_distance_on_ball(out.mean_field, *truth, 32);
    return out;
}

double hellinger(Attenuation const& phi, Attenuation const& psi, std::size_t n_mc, Rng& rng,
                 SolverConfig const& cfg)
{
    if (n_mc < 100)
        throw DomainError("hellinger needs n_mc >= 100");
    auto bds = sample_boundary_uniform(phi.dim(), n_mc, rng);
    std::vector<double> aff(bds.size());
    parallel_for(bds.size(), [&](std::size_t i) {
        double d2 = (scattering_value(phi, bds[i], cfg) - scattering_value(psi, bds[i], cfg)).squaredNorm();
        aff[i] = std::exp(-d2 / 8.0);
    });
    double s = 0;
    for (double a : aff)
        s += a;
    return std::sqrt(std::max(0.0, 1.0 - s / n_mc));
}

std::uint64_t sweep_seed(std::uint64_t seed, std::size_t n, std::uint64_t stream_id)
{
    return Rng::seed_for(Rng::seed_for(seed, static_cast<std::uint64_t>(n)), stream_id);
}

std::vector<SweepRow> consistency_sweep(PotentialField const& phi0, std::span<std::size_t const> n_grid,
                                        std::span<std::uint64_t const> seeds, PriorSpec const& spec,
                                        ChainConfig const& chain, SolverConfig const& solver)
{
    for (std::size_t i = 1; i < n_grid.size(); ++i)
        if (n_grid[i] <= n_grid[i - 1])
            throw DomainError("consistency_sweep: n_grid must be increasing");
    PriorModel model(spec);
    std::vector<SweepRow> rows(n_grid.size() * seeds.size());
    // Cells run one after another; each chain parallelises over its records.
    for (std::size_t c = 0; c < rows.size(); ++c)
    {
        std::size_t n = n_grid[c / seeds.size()];
        std::uint64_t seed = seeds[c % seeds.size()];
        Rng data_rng(sweep_seed(seed, n, stream::noise));
        Dataset ds = simulate_dataset(phi0, n, data_rng, solver);
        ChainConfig cc = chain;
        cc.seed = sweep_seed(seed, n, stream::chain);
        auto res = pcn_chain(cc, model, scale_for_n(spec, static_cast<double>(n)), ds, solver);
        auto summary = summarize(res, model, &phi0);
        rows[c] = {n, seed, spec.alpha, res.beta, res.acceptance_rate, summary.l2_error_vs_truth};
    }
    return rows;
}
}  // namespace naxray
