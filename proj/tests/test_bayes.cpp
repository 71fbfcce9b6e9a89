#include <cmath>
#include <numbers>

#include <doctest.h>

#include "naxray/bayes.hpp"
#include "naxray/errors.hpp"
#include "naxray/estimates.hpp"
#include "naxray/stats.hpp"

using namespace naxray;

namespace
{
Vec vec3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

PriorSpec small_spec(int m = 3, int modes = 2)
{
    PriorSpec s;
    s.m = m;
    s.modes = modes;
    s.structure = m == 1 ? Structure::general_real : Structure::skew_symmetric;
    return s;
}

// First Lie coordinate of the field at x.
double coord_at(PotentialField const& f, Vec const& x, std::vector<RMat> const& basis, int k = 0)
{
    return lie_coordinates(f.evaluate(x), basis)[k];
}

PotentialField field_of(PriorModel const& model, Vec const& theta, double scale = 1.0)
{
    return model.to_field(std::span<double const>(theta.data(), static_cast<std::size_t>(theta.size())), scale);
}

constexpr double kBallVolume = 4.0 * std::numbers::pi / 3.0;
}  // namespace

TEST_CASE("Lie bases are orthonormal")
{
    for (int m : {1, 2, 3, 4})
    {
        auto so = lie_basis(m, Structure::skew_symmetric);
        auto gl = lie_basis(m, Structure::general_real);
        CHECK(so.size() == static_cast<std::size_t>(m * (m - 1) / 2));
        CHECK(gl.size() == static_cast<std::size_t>(m * m));
        for (auto const* b : {&so, &gl})
            for (std::size_t i = 0; i < b->size(); ++i)
                for (std::size_t j = 0; j < b->size(); ++j)
                    CHECK(std::abs(((*b)[i].transpose() * (*b)[j]).trace() - (i == j ? 1.0 : 0.0)) < 1e-14);
        for (auto const& e : so)
            CHECK((e + e.transpose()).norm() == 0.0);
    }
    auto basis = lie_basis(3, Structure::skew_symmetric);
    CMat a = CMat::Zero(3, 3);
    for (std::size_t k = 0; k < basis.size(); ++k)
        a += (k + 1.0) * basis[k].cast<cplx>();
    auto c = lie_coordinates(a, basis);
    CHECK((c - vec3(1, 2, 3)).norm() < 1e-14);
}

TEST_CASE("prior scaling with n")
{
    PriorSpec s;
    CHECK(scale_for_n(s, 1.0) == 1.0);
    CHECK(scale_for_n(s, 1000.0) == doctest::Approx(std::pow(1000.0, -0.125)).epsilon(1e-15));
    double prev = 2;
    for (double n : {1.0, 10.0, 100.0, 1e3, 1e4})
    {
        CHECK(scale_for_n(s, n) < prev);
        prev = scale_for_n(s, n);
    }
    CHECK(std::abs(scale_for_n(s, 50.0) * scale_for_n(s, 40.0) - scale_for_n(s, 2000.0)) < 1e-15);
    PriorSpec bad;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(PriorModel{bad}, DomainError);
}

TEST_CASE("prior draws: mean, variance and stationarity")
{
    PriorSpec spec = small_spec(3, 3);
    PriorModel model(spec);
    Rng rng(11);
    std::vector<Vec> pts{vec3(0, 0, 0), vec3(0.3, -0.2, 0.1), vec3(-0.5, 0.5, 0), vec3(0.1, 0.1, 0.8),
                         vec3(-0.3, -0.3, -0.3)};
    Vec shift = vec3(0.2, 0.1, -0.15);
    int const n = 2000;
    std::vector<std::vector<double>> vals(pts.size());
    std::vector<double> x0, y0, x1, y1;
    for (int i = 0; i < n; ++i)
    {
        auto f = field_of(model, model.draw(rng), 1.0);
        for (std::size_t p = 0; p < pts.size(); ++p)
            vals[p].push_back(coord_at(f, pts[p], model.basis()));
        x0.push_back(coord_at(f, pts[1], model.basis()));
        y0.push_back(coord_at(f, pts[2], model.basis()));
        x1.push_back(coord_at(f, pts[1] + shift, model.basis()));
        y1.push_back(coord_at(f, pts[2] + shift, model.basis()));
    }
    double var = model.pointwise_variance();
    for (auto const& v : vals)
    {
        double sd = std::sqrt(stats::variance(v));
        CHECK(std::abs(stats::mean(v)) < 4 * sd / std::sqrt(n));
        CHECK(std::abs(stats::variance(v) - var) < 3 * var * std::sqrt(2.0 / (n - 1)));
    }
    auto cov = [](std::vector<double> const& a, std::vector<double> const& b) {
        double ma = stats::mean(a), mb = stats::mean(b), s = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += (a[i] - ma) * (b[i] - mb);
        return s / (a.size() - 1);
    };
    double c0 = cov(x0, y0), c1 = cov(x1, y1);
    double se = var * std::sqrt(2.0 / n);
    CHECK(std::abs(c0 - c1) < 4 * se);
}

TEST_CASE("prior model maps whitened parameters linearly")
{
    PriorModel model(small_spec(3, 2));
    Rng rng(2);
    Vec a = model.draw(rng), b = model.draw(rng);
    Vec sum = a + 2.0 * b;
    auto fa = field_of(model, a, 0.5), fb = field_of(model, b, 0.5);
    auto fs = field_of(model, sum, 0.5);
    Vec x = vec3(0.1, 0.2, -0.3);
    CHECK((fs.evaluate(x) - fa.evaluate(x) - 2.0 * fb.evaluate(x)).norm() < 1e-12);
    CHECK((fa.evaluate(x) + fa.evaluate(x).transpose()).norm() < 1e-12);
    CHECK(fa.evaluate(x).imag().norm() < 1e-12);
    CHECK_FALSE(std::isnan(sample_prior(small_spec(), rng).evaluate(x)(0, 1).real()));
}

TEST_CASE("simulated datasets")
{
    PotentialField zero(3, 3, 2, 2.0, Structure::skew_symmetric);
    Rng rng(3);
    auto ds = simulate_dataset(zero, 2000, rng, {16, false}, "zero");
    CHECK(ds.n() == 2000);
    CHECK(ds.m == 3);
    bool inward = true;
    std::vector<std::vector<double>> comps(3);
    for (auto const& r : ds.records)
    {
        inward = inward && r.bd.x.dot(r.bd.v) <= 0;
        for (int k = 0; k < 3; ++k)
            comps[k].push_back(r.y[k]);
    }
    CHECK(inward);
    for (auto& c : comps)
        CHECK(stats::ks_one_sample(c, stats::normal_cdf).p_value > 0.01);

    Rng a(9), b(9);
    auto d1 = simulate_dataset(zero, 50, a, {16, false});
    auto d2 = simulate_dataset(zero, 50, b, {16, false});
    bool same = true;
    for (std::size_t i = 0; i < 50; ++i)
        same = same && d1.records[i].y == d2.records[i].y && d1.records[i].bd.x == d2.records[i].bd.x;
    CHECK(same);
}

TEST_CASE("log-likelihood")
{
    Rng rng(4);
    auto phi = sample_prior(small_spec(), rng);
    auto basis = lie_basis(3, Structure::skew_symmetric);
    auto bd = sample_boundary_uniform(3, 1, rng).front();
    SolverConfig cfg{32, false};
    Dataset one;
    one.records.push_back({bd, lie_coordinates(scattering_value(Attenuation(phi), bd, cfg), basis)});
    CHECK(log_likelihood(phi, one, cfg) == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));

    auto ds1 = simulate_dataset(phi, 20, rng, cfg), ds2 = simulate_dataset(phi, 30, rng, cfg);
    Dataset both = ds1;
    both.records.insert(both.records.end(), ds2.records.begin(), ds2.records.end());
    double psum = log_likelihood(phi, ds1, cfg) + log_likelihood(phi, ds2, cfg);
    CHECK(log_likelihood(phi, both, cfg) == doctest::Approx(psum).epsilon(1e-13));

    // m = 1 constant potential: C = exp(c tau)
    double c = 0.4;
    auto k = PotentialField::constant(3, 2, 2.0, CMat::Constant(1, 1, c), Structure::general_real);
    Dataset scalar;
    scalar.m = 1;
    scalar.structure = Structure::general_real;
    double expect = 0;
    auto bds = sample_boundary_uniform(3, 10, rng);
    for (auto const& b : bds)
    {
        Vec y(1);
        y << rng.normal();
        scalar.records.push_back({b, y});
        double tau = exit_time(b.x, b.v);
        double r = y[0] - std::exp(c * tau);
        expect += -0.5 * r * r - 0.5 * std::log(2 * std::numbers::pi);
    }
    CHECK(std::abs(log_likelihood(k, scalar, cfg) - expect) < 1e-8);
}

TEST_CASE("likelihood cache agrees with direct evaluation")
{
    for (int m : {1, 2, 3, 4, 5})
    {
        PriorSpec spec = small_spec(m, 2);
        PriorModel model(spec);
        Rng rng(5 + m);
        SolverConfig cfg{32, false};
        auto truth = field_of(model, model.draw(rng), 0.7);
        auto ds = simulate_dataset(truth, 40, rng, cfg);
        LikelihoodCache cache(model, ds, cfg);
        Vec theta = model.draw(rng);
        double scale = 0.6;
        std::span<double const> th(theta.data(), static_cast<std::size_t>(theta.size()));
        double direct = log_likelihood(model.to_field(th, scale), ds, cfg);
        CHECK(cache(th, scale) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("pCN with constant likelihood")
{
    PriorModel model(small_spec(3, 2));
    Dataset empty;
    ChainConfig cfg;
    cfg.beta = 1.0;
    cfg.n_iter = 200;
    cfg.burn_in = 0;
    cfg.thin = 1;
    cfg.seed = 7;
    auto res = pcn_chain(cfg, model, 1.0, empty);
    CHECK(res.acceptance_rate == 1.0);
    bool zero = std::all_of(res.loglik_trace.begin(), res.loglik_trace.end(), [](double l) { return l == 0.0; });
    CHECK(zero);
    CHECK(res.samples.size() == 200);

    // beta = 0.3: the value at a point is AR(1) with rho = sqrt(1 - beta^2)
    cfg.beta = 0.3;
    cfg.n_iter = 10000;
    cfg.seed = 8;
    auto chain = pcn_chain(cfg, model, 1.0, empty);
    Vec pt = vec3(0.2, -0.1, 0.4);
    std::vector<double> vals, thinned;
    for (std::size_t i = 0; i < chain.samples.size(); ++i)
    {
        double v = coord_at(model.to_field(chain.samples[i]), pt, model.basis());
        vals.push_back(v);
        if (i % 50 == 0)
            thinned.push_back(v);
    }
    double var = model.pointwise_variance();
    double r2 = 1 - 0.09;
    double ess_sq = vals.size() * (1 - r2) / (1 + r2);
    CHECK(std::abs(stats::variance(vals) - var) < 3 * var * std::sqrt(2.0 / ess_sq));

    // marginals against fresh prior draws at three points
    Rng rng(99);
    for (Vec const& x : {pt, vec3(0, 0, 0), vec3(-0.6, 0.3, 0.1)})
    {
        std::vector<double> chain_vals, fresh;
        for (std::size_t i = 0; i < chain.samples.size(); i += 50)
            chain_vals.push_back(coord_at(model.to_field(chain.samples[i]), x, model.basis()));
        for (int i = 0; i < 2000; ++i)
            fresh.push_back(coord_at(field_of(model, model.draw(rng)), x, model.basis()));
        CHECK(stats::ks_two_sample(chain_vals, fresh).p_value > 0.01);
    }

    ChainConfig bad;
    bad.beta = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad.beta = 0.5;
    bad.burn_in = bad.n_iter;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("pCN acceptance with moderate data")
{
    PriorSpec spec = small_spec(3, 2);
    PriorModel model(spec);
    Rng rng(10);
    SolverConfig cfg{16, false};
    auto truth = field_of(model, model.draw(rng), 1.0);
    auto ds = simulate_dataset(truth, 100, rng, cfg);
    ChainConfig cc;
    cc.beta = 0.1;
    cc.n_iter = 600;
    cc.burn_in = 100;
    cc.seed = 3;
    auto res = pcn_chain(cc, model, 1.0, ds, cfg);
    CHECK(res.acceptance_rate > 0.05);
    CHECK(res.acceptance_rate < 0.95);
    CHECK(res.beta == 0.1);

    cc.adapt = true;
    cc.beta = 0.9;
    auto tuned = pcn_chain(cc, model, 1.0, ds, cfg);
    CHECK(tuned.beta < 0.9);
    CHECK(tuned.acceptance_rate > 0.05);
}

TEST_CASE("posterior mean")
{
    Rng rng(12);
    PriorSpec spec = small_spec(3, 2);
    auto phi = sample_prior(spec, rng);
    std::vector<PotentialField> one{phi};
    CHECK(l2_distance_on_ball(posterior_mean(one), phi, 16) == 0.0);
    std::vector<PotentialField> pm{phi, -1.0 * phi};
    CHECK(l2_norm_on_ball(posterior_mean(pm), 16) < 1e-14);
    CHECK_THROWS_AS(posterior_mean(std::span<PotentialField const>{}), DomainError);

    PriorModel model(spec);
    std::vector<PotentialField> draws;
    double mean_err = 0;
    for (int i = 0; i < 500; ++i)
    {
        draws.push_back(field_of(model, model.draw(rng)));
        mean_err += l2_distance_on_ball(draws.back(), phi, 16);
    }
    mean_err /= 500;
    auto mean = posterior_mean(draws);
    double prior_sd = std::sqrt(kBallVolume * model.lie_dim() * model.pointwise_variance());
    CHECK(l2_norm_on_ball(mean, 16) < 3 * prior_sd / std::sqrt(500.0));
    CHECK(l2_distance_on_ball(mean, phi, 16) <= mean_err);
}

TEST_CASE("Hellinger distance")
{
    Rng rng(13);
    SolverConfig cfg{32, false};
    auto phi = sample_prior(small_spec(), rng);
    Rng h0(1);
    CHECK(hellinger(phi, phi, 200, h0, cfg) == 0.0);

    // h^2 = mean(1 - e^{-x/8}) with x = |dC|^2 <= 4m on SO(m):
    // e^{-m/2} |dC|^2 / 8 <= h^2 <= |dC|^2 / 8 on the same directions.
    double lo = std::sqrt(std::exp(-1.5) / 8), hi = std::sqrt(1.0 / 8);
    for (int k = 0; k < 20; ++k)
    {
        auto a = sample_prior(small_spec(), rng), b = sample_prior(small_spec(), rng);
        std::uint64_t s = 100 + k;
        Rng r1(s), r2(s), r3(s);
        double h = hellinger(a, b, 200, r1, cfg);
        double hs = hellinger(b, a, 200, r3, cfg);
        auto bds = sample_boundary_uniform(3, 200, r2);
        double dc = data_distance(a, b, bds, cfg);
        CHECK(h >= 0);
        CHECK(h < 1);
        CHECK(h >= lo * dc * (1 - 1e-12));
        CHECK(h <= hi * dc * (1 + 1e-12));
        CHECK(std::abs(h - hs) < 1e-14);
    }

    // small perturbation: h ~ |dC| / (2 sqrt 2)
    auto dir = sample_prior(small_spec(), rng);
    auto psi = phi + 1e-3 * dir;
    Rng r1(5), r2(5);
    double h = hellinger(phi, psi, 400, r1, cfg);
    double dc = data_distance(phi, psi, sample_boundary_uniform(3, 400, r2), cfg);
    CHECK(std::abs(h / (dc / (2 * std::sqrt(2.0))) - 1) < 0.1);
    CHECK_THROWS_AS(hellinger(phi, psi, 10, r1, cfg), DomainError);
}

TEST_CASE("effective sample size")
{
    Rng rng(14);
    std::vector<double> iid, ar;
    double x = 0;
    for (int i = 0; i < 5000; ++i)
    {
        iid.push_back(rng.normal());
        x = 0.9 * x + std::sqrt(1 - 0.81) * rng.normal();
        ar.push_back(x);
    }
    CHECK(effective_sample_size(iid) > 3500);
    double expect = 5000 * 0.1 / 1.9;
    CHECK(effective_sample_size(ar) > 0.5 * expect);
    CHECK(effective_sample_size(ar) < 2.0 * expect);
}

TEST_CASE("consistency sweep bookkeeping")
{
    PriorSpec spec = small_spec(3, 2);
    PriorModel model(spec);
    PotentialField zero(3, 3, 2, 2.0, Structure::skew_symmetric);
    ChainConfig cc;
    cc.n_iter = 150;
    cc.burn_in = 50;
    cc.thin = 5;
    SolverConfig cfg{16, false};
    std::vector<std::size_t> ns{40, 80, 160};
    std::vector<std::uint64_t> seeds{1, 2};
    auto rows = consistency_sweep(zero, ns, seeds, spec, cc, cfg);
    REQUIRE(rows.size() == 6);
    double prior_sd = std::sqrt(kBallVolume * model.lie_dim() * model.pointwise_variance());
    for (auto const& r : rows)
    {
        CHECK(r.alpha == spec.alpha);
        CHECK(r.l2_error <= 3 * prior_sd * scale_for_n(spec, static_cast<double>(r.n)));
    }
    CHECK(rows[0].n == 40);
    CHECK(rows[0].seed == 1);
    CHECK(rows[1].seed == 2);
    CHECK(rows[5].n == 160);

    std::vector<std::size_t> single{80};
    std::vector<std::uint64_t> s2{2};
    auto again = consistency_sweep(zero, single, s2, spec, cc, cfg);
    CHECK(std::abs(again[0].l2_error - rows[3].l2_error) < 1e-12);
    CHECK(sweep_seed(1, 40, 0) != sweep_seed(1, 80, 0));
    CHECK(sweep_seed(1, 40, 0) != sweep_seed(1, 40, 1));

    std::vector<std::size_t> bad{80, 40};
    CHECK_THROWS_AS(consistency_sweep(zero, bad, seeds, spec, cc, cfg), DomainError);
}
