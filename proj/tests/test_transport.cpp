#include <cmath>
#include <numbers>

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "naxray/errors.hpp"
#include "naxray/quadrature.hpp"
#include "naxray/transport.hpp"

using namespace naxray;

namespace
{
Vec vec3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

// Gauss-Legendre integral of f along the chord, independent of the solver grid.
cplx gauss_line_integral(PotentialField const& f, BoundaryDirection const& bd, int n = 200)
{
    double tau = exit_time(bd.x, bd.v);
    auto rule = gauss_legendre(n, 0.0, tau);
    cplx s = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights[i] * f.evaluate(bd.x + rule.nodes[i] * bd.v)(0, 0);
    return s;
}

BoundaryDirection random_bd(Rng& rng)
{
    return sample_boundary_uniform(3, 1, rng).front();
}
}  // namespace

TEST_CASE("zero attenuation gives the identity path")
{
    PotentialField z(3, 2, 3, 2.0, Structure::general_complex);
    Rng rng(1);
    auto bd = random_bd(rng);
    auto path = solve_transport(Attenuation(z), GeodesicSegment::chord(bd.x, bd.v, 64));
    for (auto const& u : path.values)
        CHECK((u - CMat::Identity(2, 2)).norm() == 0.0);
    CHECK((path.values.back() - CMat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("constant scalar multiple of the identity")
{
    // U' = -c U, U(tau) = Id  =>  U(0) = exp(c tau) Id
    double c = 0.7;
    auto k = PotentialField::constant(3, 3, 2.0, CMat::Identity(2, 2) * c, Structure::general_real);
    Rng rng(2);
    for (int i = 0; i < 20; ++i)
    {
        auto bd = random_bd(rng);
        double tau = exit_time(bd.x, bd.v);
        CMat u = scattering_value(Attenuation(k), bd);
        CHECK((u - std::exp(c * tau) * CMat::Identity(2, 2)).norm() / std::exp(c * tau) < 1e-10);
    }
}

TEST_CASE("constant matrix potential matches the matrix exponential")
{
    CMat a(2, 2);
    a << cplx(0.3, 0.1), cplx(-0.5, 0), cplx(0.2, 0.4), cplx(-0.1, 0);
    auto k = PotentialField::constant(3, 3, 2.0, a, Structure::general_complex);
    auto bd = BoundaryDirection::make(vec3(1, 0, 0), vec3(-1, 0, 0));
    CMat expect = (a * 2.0).exp();
    CHECK((scattering_value(Attenuation(k), bd) - expect).norm() < 1e-10);
}

TEST_CASE("abelian case reduces to the X-ray transform")
{
    Rng rng(3);
    auto f = random_field(3, 1, 5, 2.0, Structure::general_real, 1.0, 1.0, rng);
    double worst = 0;
    for (int i = 0; i < 50; ++i)
    {
        auto bd = random_bd(rng);
        cplx lg = std::log(scattering_value(Attenuation(f), bd)(0, 0));
        cplx exact = gauss_line_integral(f, bd);
        worst = std::max(worst, std::abs(lg - exact) / std::max(1.0, std::abs(exact)));
        // same-grid Simpson comparison
        CMat simpson = weighted_xray(Weight::identity(), f, bd);
        worst = std::max(worst, std::abs(lg - simpson(0, 0)) / std::max(1.0, std::abs(exact)));
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("RK4 converges at order four")
{
    Rng rng(4);
    auto f = random_field(3, 2, 5, 2.0, Structure::general_complex, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    auto u = [&](int spu) { return scattering_value(Attenuation(f), bd, {spu, false}); };
    CMat u1 = u(16), u2 = u(32), u4 = u(64);
    double ratio = (u1 - u2).norm() / (u2 - u4).norm();
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);

    SolverConfig cfg{32, true};
    auto path = solve_transport(Attenuation(f), GeodesicSegment::chord(bd.x, bd.v, 32), cfg);
    CHECK(path.error_estimate > 0);
    CHECK(path.error_estimate < 10 * (u2 - u4).norm() + 1e-15);
}

TEST_CASE("path satisfies the ODE under finite differences")
{
    Rng rng(5);
    auto f = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    auto seg = GeodesicSegment::chord(bd.x, bd.v, 256);
    auto path = solve_transport(Attenuation(f), seg);
    double h = seg.step(), worst = 0;
    for (std::size_t j = 2; j + 2 < path.values.size(); ++j)
    {
        // fourth-order central difference
        CMat du = (-path.values[j + 2] + 8.0 * path.values[j + 1] - 8.0 * path.values[j - 1] + path.values[j - 2]) /
                  (12 * h);
        CMat res = du + f.evaluate(seg.point(path.times[j])) * path.values[j];
        worst = std::max(worst, res.norm());
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("skew potentials give orthogonal data")
{
    Rng rng(6);
    auto f = random_field(3, 3, 5, 2.0, Structure::skew_symmetric, 1.0, 1.0, rng);
    auto bds = sample_boundary_uniform(3, 100, rng);
    auto recs = scattering_data(Attenuation(f), bds);
    for (auto const& r : recs)
    {
        CHECK((r.value.adjoint() * r.value - CMat::Identity(3, 3)).norm() < 1e-8);
        CHECK(std::abs(r.value.determinant() - 1.0) < 1e-8);
    }
}

TEST_CASE("cocycle property")
{
    Rng rng(7);
    auto f = random_field(3, 2, 4, 2.0, Structure::general_complex, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    double tau = exit_time(bd.x, bd.v);
    double ts = 0.4 * tau;
    Vec mid = bd.x + ts * bd.v;
    // U over [0, tau] = U over [0, ts] (terminal Id at ts) times U over [ts, tau]
    auto first = solve_transport(Attenuation(f), GeodesicSegment::of_length(bd.x, bd.v, ts, 256));
    auto second = solve_transport(Attenuation(f), GeodesicSegment::of_length(mid, bd.v, tau - ts, 256));
    CMat whole = scattering_value(Attenuation(f), bd, {1024, false});
    CHECK((first.initial() * second.initial() - whole).norm() < 1e-6 * whole.norm());
}

TEST_CASE("inverse path inverts the primal path")
{
    Rng rng(8);
    auto f = random_field(3, 2, 4, 2.0, Structure::general_complex, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    auto seg = GeodesicSegment::chord(bd.x, bd.v, 256);
    auto u = solve_transport(Attenuation(f), seg);
    auto v = solve_inverse_transport(Attenuation(f), seg);
    double worst = 0;
    for (std::size_t j = 0; j < u.values.size(); ++j)
        worst = std::max(worst, (v.values[j] * u.values[j] - CMat::Identity(2, 2)).norm());
    CHECK(worst < 1e-9);
}

TEST_CASE("Gronwall representation of the inhomogeneous problem")
{
    // G' + A G = -F U on [0, tau] with G(tau) = 0 has G(0) = U(0) int_0^tau U^{-1} F U dt.
    Rng rng(9);
    auto a = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto fsrc = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    auto seg = GeodesicSegment::chord(bd.x, bd.v, 512);
    auto u = solve_transport(Attenuation(a), seg);
    auto uinv = solve_inverse_transport(Attenuation(a), seg);
    double h = seg.step();
    auto w = simpson_weights(seg.n_steps, h);
    CMat integral = CMat::Zero(2, 2);
    for (int j = 0; j <= seg.n_steps; ++j)
        integral += w[j] * uinv.values[j] * fsrc.evaluate(seg.point(j * h)) * u.values[j];
    CMat rep = u.initial() * integral;

    // direct RK4 on the augmented system [U G; 0 U] ~ block ODE
    int m = 2;
    auto bigA = [&](double t) {
        CMat b = CMat::Zero(2 * m, 2 * m);
        Vec x = seg.point(t);
        b.topLeftCorner(m, m) = a.evaluate(x);
        b.bottomRightCorner(m, m) = a.evaluate(x);
        b.topRightCorner(m, m) = fsrc.evaluate(x);
        return b;
    };
    CMat y = CMat::Identity(2 * m, 2 * m);
    y.topRightCorner(m, m).setZero();
    int n = 2048;
    double hh = seg.t_exit / n;
    for (int j = n; j >= 1; --j)
    {
        // s = tau - t, dY/ds = B Y
        double t = j * hh;
        CMat k1 = bigA(t) * y;
        CMat k2 = bigA(t - hh / 2) * (y + 0.5 * hh * k1);
        CMat k3 = bigA(t - hh / 2) * (y + 0.5 * hh * k2);
        CMat k4 = bigA(t - hh) * (y + hh * k3);
        y += (hh / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    // Y' = -B Y with Y(tau) = Id has block form [U, G; 0, U]
    CHECK((y.topLeftCorner(m, m) - u.initial()).norm() < 1e-8 * u.initial().norm());
    CHECK((y.topRightCorner(m, m) - rep).norm() < 1e-7 * rep.norm());
}

TEST_CASE("integrating factor")
{
    PotentialField z(3, 2, 4, 2.0, Structure::general_real);
    Vec x = vec3(0.2, -0.1, 0.3), v = vec3(0, 1, 0);
    CHECK((integrating_factor(Attenuation(z), x, v) - CMat::Identity(2, 2)).norm() == 0.0);
    CHECK_THROWS_AS(integrating_factor(Attenuation(z), x, v, 0.0), DomainError);

    Rng rng(10);
    auto f = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    Attenuation att(f);
    double delta = 0.25;
    double bound = std::sqrt(2.0) * std::exp(2 * (1 + delta) * linf_norm(att.extended(delta).phi, 33));
    double worst_res = 0;
    for (int i = 0; i < 100; ++i)
    {
        Vec p = Vec::Random(3) * 0.5;
        Vec dir = Vec::Random(3).normalized();
        CMat r = integrating_factor(att, p, dir, delta);
        CHECK(r.norm() <= bound);
        // transport along the flow: d/ds R(p + s v) = -A R
        double h = 1e-3;
        CMat rp = integrating_factor(att, p + h * dir, dir, delta, {1024, false});
        CMat rm = integrating_factor(att, p - h * dir, dir, delta, {1024, false});
        CMat r0 = integrating_factor(att, p, dir, delta, {1024, false});
        CMat res = (rp - rm) / (2 * h) + f.evaluate(p) * r0;
        worst_res = std::max(worst_res, res.norm() / r0.norm());
    }
    CHECK(worst_res < 1e-4);
}

TEST_CASE("weighted transform")
{
    auto one = PotentialField::constant(3, 3, 2.0, CMat::Identity(1, 1), Structure::general_real);
    Rng rng(11);
    for (int i = 0; i < 10; ++i)
    {
        auto bd = random_bd(rng);
        CMat v = weighted_xray(Weight::identity(), one, bd);
        CHECK(std::abs(v(0, 0) - exit_time(bd.x, bd.v)) < 1e-12);
    }
    auto f = random_field(3, 2, 4, 2.0, Structure::general_complex, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    auto wl = Weight::left([](Vec const& x, Vec const&) {
        CMat w(2, 2);
        w << 1 + x[0], 0.5, cplx(0, 0.2), 2;
        return w;
    });
    CMat a = weighted_xray(wl, f, bd), b = weighted_xray(wl.scaled(3.5), f, bd);
    CHECK((b - 3.5 * a).norm() <= 1e-12 * b.norm());

    // single Fourier mode along a diameter against a dense trapezoid oracle
    PotentialField mode(3, 1, 5, 2.0, Structure::general_complex);
    int idx[3] = {mode.index_of(1), mode.index_of(2), mode.index_of(0)};
    mode.coeff(mode.flat_index(idx), 0, 0) = 1.0;
    auto diam = BoundaryDirection::make(vec3(1, 0, 0), vec3(-1, 0, 0));
    cplx xr = weighted_xray(Weight::identity(), mode, diam)(0, 0);
    int n = 1000000;
    cplx trap = 0;
    for (int j = 0; j <= n; ++j)
    {
        double t = 2.0 * j / n, x1 = 1 - t;
        cplx val = std::exp(cplx(0, std::numbers::pi * x1 / 2.0));
        trap += (j == 0 || j == n ? 0.5 : 1.0) * val;
    }
    trap *= 2.0 / n;
    CHECK(std::abs(xr - trap) < 1e-9);

    // linear weight acting on the row-major vectorisation
    auto transpose = Weight::linear([](Vec const&, Vec const&) {
        CMat p = CMat::Zero(4, 4);
        p(0, 0) = p(1, 2) = p(2, 1) = p(3, 3) = 1;
        return p;
    });
    CHECK((weighted_xray(transpose, f, bd) - weighted_xray(Weight::identity(), f, bd).transpose()).norm() < 1e-13);
}

TEST_CASE("pseudo-linearisation identity")
{
    Rng rng(12);
    auto phi = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto psi = random_field(3, 2, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto bd = random_bd(rng);
    CHECK(pseudolin_residual(Attenuation(phi), Attenuation(phi), bd) < 1e-12);

    auto s1 = random_field(3, 1, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    auto s2 = random_field(3, 1, 4, 2.0, Structure::general_real, 1.0, 1.0, rng);
    CHECK(pseudolin_residual(Attenuation(s1), Attenuation(s2), bd) < 1e-7);

    double coarse = pseudolin_residual(Attenuation(phi), Attenuation(psi), bd, 0.25, {32, false});
    double fine = pseudolin_residual(Attenuation(phi), Attenuation(psi), bd, 0.25, {64, false});
    CHECK(coarse > 0);
    CHECK(std::log2(coarse / fine) >= 2.0);
}

TEST_CASE("non-finite fields raise a numeric error")
{
    auto f = PotentialField::constant(3, 3, 2.0, CMat::Identity(1, 1), Structure::general_real);
    f.coeffs()[0] = cplx(std::numeric_limits<double>::quiet_NaN(), 0);
    Rng rng(13);
    CHECK_THROWS_AS(scattering_value(Attenuation(f), random_bd(rng)), NumericError);
}
