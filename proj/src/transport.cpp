#include "naxray/transport.hpp"

#include <cmath>
#include <sstream>

#include "naxray/errors.hpp"
#include "naxray/parallel.hpp"
#include "naxray/quadrature.hpp"

namespace naxray
{
namespace
{
using Small = SmallMat<cplx>;

Small block(std::span<cplx const> a, int node, int m)
{
    Small out(m, m);
    cplx const* p = a.data() + static_cast<std::size_t>(node) * m * m;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            out(i, j) = p[i * m + j];
    return out;
}

void check_finite(std::vector<cplx> const& a, Vec const& x, Vec const& v, double t0, double dt, int mm)
{
    for (std::size_t q = 0; q < a.size(); ++q)
    {
        if (std::isfinite(a[q].real()) && std::isfinite(a[q].imag()))
            continue;
        double t = t0 + static_cast<double>(q / mm) * dt;
        Vec p = x + t * v;
        std::ostringstream os;
        os << "non-finite attenuation at t = " << t << ", x = (";
        for (Eigen::Index i = 0; i < p.size(); ++i)
            os << (i ? ", " : "") << p[i];
        os << ")";
        throw NumericError(os.str());
    }
}

// Backward RK4 for U' + A U = 0, U(end) = Id; visit(j, U(t_j)) for j < n_steps.
template <class Visit>
Small rk4_backward_steps(std::span<cplx const> a_half, int m, int n_steps, double h, Visit&& visit)
{
    Small u = Small::Identity(m, m);
    for (int j = n_steps; j >= 1; --j)
    {
        // s = t_j - t, dU/ds = A U
        Small a0 = block(a_half, 2 * j, m);
        Small am = block(a_half, 2 * j - 1, m);
        Small a1 = block(a_half, 2 * j - 2, m);
        Small k1 = a0 * u;
        Small k2 = am * (u + 0.5 * h * k1);
        Small k3 = am * (u + 0.5 * h * k2);
        Small k4 = a1 * (u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        visit(j - 1, u);
    }
    return u;
}

// Backward RK4 for V' = V A (right action), V(end) = Id.
std::vector<CMat> rk4_backward_right(std::span<cplx const> a_half, int m, int n_steps, double h)
{
    std::vector<CMat> out(n_steps + 1);
    Small v = Small::Identity(m, m);
    out[n_steps] = v;
    for (int j = n_steps; j >= 1; --j)
    {
        // s = t_j - t, dV/ds = -V A
        Small a0 = block(a_half, 2 * j, m);
        Small am = block(a_half, 2 * j - 1, m);
        Small a1 = block(a_half, 2 * j - 2, m);
        Small k1 = -(v * a0);
        Small k2 = -((v + 0.5 * h * k1) * am);
        Small k3 = -((v + 0.5 * h * k2) * am);
        Small k4 = -((v + h * k3) * a1);
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out[j - 1] = v;
    }
    return out;
}

std::vector<cplx> chord_samples(Attenuation const& att, GeodesicSegment const& seg)
{
    double h = seg.step();
    auto a = sample_attenuation(att, seg.origin, seg.direction, 0.0, 0.5 * h, 2 * seg.n_steps + 1);
    check_finite(a, seg.origin, seg.direction, 0.0, 0.5 * h, att.matrix_size() * att.matrix_size());
    return a;
}

CMat boundary_u0(Attenuation const& att, GeodesicSegment const& seg)
{
    int const m = att.matrix_size();
    if (seg.n_steps == 0)
        return CMat::Identity(m, m);
    auto a = chord_samples(att, seg);
    return rk4_backward_steps(a, m, seg.n_steps, seg.step(), [](int, Small const&) {});
}

CMat invert(CMat const& r, char const* what)
{
    Eigen::PartialPivLU<CMat> lu(r);
    double det = std::abs(lu.determinant());
    if (!(det > 1e-300) || !std::isfinite(det))
        throw NumericError(std::string("singular ") + what);
    return lu.inverse();
}
}  // namespace

void SolverConfig::validate() const
{
    if (steps_per_unit < 16)
        throw DomainError("steps_per_unit must be >= 16");
}

std::vector<cplx> sample_attenuation(Attenuation const& att, Vec const& x, Vec const& v, double t0, double dt,
                                     int count)
{
    int const mm = att.matrix_size() * att.matrix_size();
    std::vector<cplx> out(static_cast<std::size_t>(count) * mm);
    att.phi.evaluate_along(x, v, t0, dt, count, out.data());
    if (att.one_form.empty())
        return out;
    std::vector<cplx> tmp(out.size());
    for (std::size_t j = 0; j < att.one_form.size(); ++j)
    {
        double vj = v[static_cast<Eigen::Index>(j)];
        if (vj == 0.0)
            continue;
        att.one_form[j].evaluate_along(x, v, t0, dt, count, tmp.data());
        for (std::size_t q = 0; q < out.size(); ++q)
            out[q] += vj * tmp[q];
    }
    return out;
}

std::vector<CMat> rk4_backward(std::span<cplx const> a_half, int m, int n_steps, double h)
{
    std::vector<CMat> out(n_steps + 1);
    out[n_steps] = CMat::Identity(m, m);
    rk4_backward_steps(a_half, m, n_steps, h, [&](int j, Small const& u) { out[j] = u; });
    return out;
}

MatrixPath solve_transport(Attenuation const& att, GeodesicSegment const& seg, SolverConfig const& cfg)
{
    cfg.validate();
    int const m = att.matrix_size();
    MatrixPath path;
    if (seg.n_steps == 0)
    {
        path.times = {0.0};
        path.values = {CMat::Identity(m, m)};
        return path;
    }
    double h = seg.step();
    auto a = chord_samples(att, seg);
    path.values = rk4_backward(a, m, seg.n_steps, h);
    path.times.resize(seg.n_steps + 1);
    for (int j = 0; j <= seg.n_steps; ++j)
        path.times[j] = j * h;
    path.times.back() = seg.t_exit;
    if (cfg.richardson)
    {
        GeodesicSegment fine = seg;
        fine.n_steps *= 2;
        CMat u_fine = boundary_u0(att, fine);
        path.error_estimate = (path.values.front() - u_fine).norm() / 15.0;
    }
    return path;
}

MatrixPath solve_inverse_transport(Attenuation const& att, GeodesicSegment const& seg, SolverConfig const& cfg)
{
    cfg.validate();
    int const m = att.matrix_size();
    MatrixPath path;
    if (seg.n_steps == 0)
    {
        path.times = {0.0};
        path.values = {CMat::Identity(m, m)};
        return path;
    }
    double h = seg.step();
    auto a = chord_samples(att, seg);
    path.values = rk4_backward_right(a, m, seg.n_steps, h);
    path.times.resize(seg.n_steps + 1);
    for (int j = 0; j <= seg.n_steps; ++j)
        path.times[j] = j * h;
    path.times.back() = seg.t_exit;
    return path;
}

CMat scattering_value(Attenuation const& att, BoundaryDirection const& bd, SolverConfig const& cfg)
{
    cfg.validate();
    return boundary_u0(att, GeodesicSegment::chord(bd.x, bd.v, cfg.steps_per_unit));
}

std::vector<ScatteringRecord> scattering_data(Attenuation const& att, std::span<BoundaryDirection const> bds,
                                              SolverConfig const& cfg)
{
    cfg.validate();
    std::vector<ScatteringRecord> out(bds.size());
    parallel_for(bds.size(), [&](std::size_t i) { out[i] = {bds[i], scattering_value(att, bds[i], cfg)}; });
    return out;
}

std::vector<CMat> integrating_factor_path(Attenuation const& att, Vec const& x, Vec const& v, double delta,
                                          double h)
{
    if (!(delta > 0))
        throw DomainError("integrating factor needs delta > 0");
    if (!(h > 0))
        throw DomainError("integrating factor needs a positive step");
    if (x.norm() > 1 + kGeomTol)
        throw DomainError("integrating factor base point outside the unit ball");
    Attenuation ext = att.extended(delta);
    double t_out = exit_time_radius(x, v, 1.0 + delta);
    // Past the enlarged exit the extension vanishes, so overshooting by < h is exact.
    int n = std::max(1, static_cast<int>(std::ceil(t_out / h - 1e-12)));
    auto a = sample_attenuation(ext, x, v, 0.0, 0.5 * h, 2 * n + 1);
    check_finite(a, x, v, 0.0, 0.5 * h, att.matrix_size() * att.matrix_size());
    return rk4_backward(a, att.matrix_size(), n, h);
}

CMat integrating_factor(Attenuation const& att, Vec const& x, Vec const& v, double delta, SolverConfig const& cfg)
{
    cfg.validate();
    return integrating_factor_path(att, x, v, delta, 1.0 / cfg.steps_per_unit).front();
}

//---------------------------------------------------------------------------//

Weight Weight::identity()
{
    return {[](Vec const&, Vec const&, CMat&) {}};
}

Weight Weight::left(std::function<CMat(Vec const&, Vec const&)> w)
{
    return {[w = std::move(w)](Vec const& x, Vec const& v, CMat& a) { a = w(x, v) * a; }};
}

Weight Weight::conjugation(std::function<CMat(Vec const&, Vec const&)> l,
                           std::function<CMat(Vec const&, Vec const&)> r)
{
    return {[l = std::move(l), r = std::move(r)](Vec const& x, Vec const& v, CMat& a) { a = l(x, v) * a * r(x, v); }};
}

Weight Weight::linear(std::function<CMat(Vec const&, Vec const&)> op)
{
    return {[op = std::move(op)](Vec const& x, Vec const& v, CMat& a) {
        Eigen::Index m = a.rows();
        Eigen::VectorXcd vec(m * m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                vec[i * m + j] = a(i, j);
        Eigen::VectorXcd r = op(x, v) * vec;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                a(i, j) = r[i * m + j];
    }};
}

Weight Weight::scaled(double t) const
{
    return {[inner = apply, t](Vec const& x, Vec const& v, CMat& a) {
        inner(x, v, a);
        a *= t;
    }};
}

CMat weighted_integral(Weight const& w, PotentialField const& f, GeodesicSegment const& seg,
                       std::function<bool(Vec const&)> const& mask)
{
    int const m = f.matrix_size();
    int const mm = m * m;
    CMat total = CMat::Zero(m, m);
    if (seg.n_steps == 0)
        return total;
    double h = seg.step();
    std::vector<cplx> vals(static_cast<std::size_t>(seg.n_steps + 1) * mm);
    f.evaluate_along(seg.origin, seg.direction, 0.0, h, seg.n_steps + 1, vals.data());
    auto sw = simpson_weights(seg.n_steps, h);
    CMat a(m, m);
    for (int j = 0; j <= seg.n_steps; ++j)
    {
        Vec p = seg.point(j * h);
        if (mask && !mask(p))
            continue;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
                a(r, c) = vals[static_cast<std::size_t>(j) * mm + r * m + c];
        w.apply(p, seg.direction, a);
        total += sw[j] * a;
    }
    return total;
}

CMat weighted_xray(Weight const& w, PotentialField const& f, BoundaryDirection const& bd, SolverConfig const& cfg)
{
    cfg.validate();
    return weighted_integral(w, f, GeodesicSegment::chord(bd.x, bd.v, cfg.steps_per_unit));
}

double pseudolin_residual(Attenuation const& phi, Attenuation const& psi, BoundaryDirection const& bd, double delta,
                          SolverConfig const& cfg)
{
    cfg.validate();
    if (phi.dim() != psi.dim() || phi.matrix_size() != psi.matrix_size())
        throw DomainError("pseudolin_residual: fields must share (d, m)");
    int const m = phi.matrix_size();
    int const mm = m * m;
    auto seg = GeodesicSegment::chord(bd.x, bd.v, cfg.steps_per_unit);
    if (seg.n_steps == 0)
        return 0.0;
    double h = seg.step();
    int const n = seg.n_steps;

    // Left side: two independent boundary solves.
    CMat lhs = boundary_u0(phi, seg) - boundary_u0(psi, seg);

    // Right side: integrating factors on the same grid, weighted transform of the difference.
    auto r_phi = integrating_factor_path(phi, bd.x, bd.v, delta, h);
    auto r_psi = integrating_factor_path(psi, bd.x, bd.v, delta, h);
    auto a_phi = sample_attenuation(phi, bd.x, bd.v, 0.0, h, n + 1);
    auto a_psi = sample_attenuation(psi, bd.x, bd.v, 0.0, h, n + 1);
    auto sw = simpson_weights(n, h);
    CMat integral = CMat::Zero(m, m);
    CMat diff(m, m);
    for (int j = 0; j <= n; ++j)
    {
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
            {
                std::size_t q = static_cast<std::size_t>(j) * mm + r * m + c;
                diff(r, c) = a_phi[q] - a_psi[q];
            }
        integral += sw[j] * (invert(r_phi[j], "integrating factor") * diff * r_psi[j]);
    }
    CMat rhs = r_phi[0] * integral * invert(r_psi[n], "integrating factor at exit");
    return (lhs - rhs).norm();
}
}  // namespace naxray
