#include "naxray/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "naxray/errors.hpp"
#include "naxray/parallel.hpp"
#include "naxray/rng.hpp"

namespace naxray
{
namespace
{
struct Frame3
{
    Vec x, n, e1, e2;
};

// Direction at x from the angle beta to the inward normal and azimuth gamma.
Vec direction_3d(Frame3 const& f, double beta, double gamma)
{
    Vec v = std::cos(beta) * f.n + std::sin(beta) * (std::cos(gamma) * f.e1 + std::sin(gamma) * f.e2);
    return v / v.norm();
}

Vec direction_2d(Vec const& x, double beta)
{
    Vec n = -x;
    Vec t(2);
    t << -x[1], x[0];
    Vec v = std::cos(beta) * n + std::sin(beta) * t;
    return v / v.norm();
}

Vec unit_x(Vec const& x)
{
    return x / x.norm();
}

void fill_grid(BoundaryGrid& g, std::function<bool(std::vector<double> const&, BoundaryDirection&, double&)> map)
{
    std::size_t total = 1;
    for (auto const& a : g.axes)
        total *= static_cast<std::size_t>(a.n);
    g.nodes.resize(total);
    g.weights.assign(total, 0.0);
    g.active.assign(total, false);
    double cell = 1;
    for (auto const& a : g.axes)
        cell *= a.spacing();
    std::vector<double> p(g.axes.size());
    for (std::size_t flat = 0; flat < total; ++flat)
    {
        std::size_t rest = flat;
        for (int a = static_cast<int>(g.axes.size()) - 1; a >= 0; --a)
        {
            int i = static_cast<int>(rest % g.axes[a].n);
            rest /= g.axes[a].n;
            p[a] = g.axes[a].node(i);
        }
        double density = 0;
        bool ok = map(p, g.nodes[flat], density);
        g.active[flat] = ok;
        g.weights[flat] = ok ? density * cell : 0.0;
    }
}

double mean_sq_norm(std::span<ScatteringRecord const> records, double* var)
{
    if (records.empty())
        throw DomainError("boundary norm of an empty record set");
    std::vector<double> s(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        s[i] = records[i].value.squaredNorm();
    double mean = 0;
    for (double x : s)
        mean += x;
    mean /= s.size();
    if (var)
    {
        double acc = 0;
        for (double x : s)
            acc += (x - mean) * (x - mean);
        *var = s.size() > 1 ? acc / (s.size() - 1) : 0.0;
    }
    return mean;
}
}  // namespace

//---------------------------------------------------------------------------//

double BoundaryGrid::volume() const
{
    double v = 0;
    for (double w : weights)
        v += w;
    return v;
}

std::size_t BoundaryGrid::neighbour(std::size_t flat, int axis, int step) const
{
    std::size_t stride = 1;
    for (int a = static_cast<int>(axes.size()) - 1; a > axis; --a)
        stride *= axes[a].n;
    int n = axes[axis].n;
    int i = static_cast<int>((flat / stride) % n);
    int j = i + step;
    if (j < 0 || j >= n)
    {
        if (!axes[axis].periodic)
            return npos;
        j = ((j % n) + n) % n;
    }
    return flat + (static_cast<std::ptrdiff_t>(j) - i) * static_cast<std::ptrdiff_t>(stride);
}

BoundaryGrid BoundaryGrid::full(int d, int per_axis, double glancing_margin)
{
    if (per_axis < 1)
        throw DomainError("boundary grid needs at least one node per axis");
    if (glancing_margin < 0 || glancing_margin >= kPi / 2)
        throw DomainError("glancing margin must lie in [0, pi/2)");
    BoundaryGrid g;
    g.d = d;
    g.glancing_margin = glancing_margin;
    double bmax = kPi / 2 - glancing_margin;
    if (d == 2)
    {
        g.axes = {{0, 2 * kPi, per_axis, true}, {-bmax, bmax, per_axis, false}};
        fill_grid(g, [](std::vector<double> const& p, BoundaryDirection& bd, double& w) {
            Vec x(2);
            x << std::cos(p[0]), std::sin(p[0]);
            bd = {x, direction_2d(x, p[1])};
            w = 1.0;
            return true;
        });
        return g;
    }
    if (d != 3)
        throw DomainError("boundary grids support d = 2 or 3");
    g.axes = {{0, kPi, per_axis, false}, {0, 2 * kPi, per_axis, true}, {0, bmax, per_axis, false},
              {0, 2 * kPi, per_axis, true}};
    fill_grid(g, [](std::vector<double> const& p, BoundaryDirection& bd, double& w) {
        double th = p[0], ph = p[1];
        Frame3 f;
        f.x = Vec(3);
        f.x << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
        f.n = -f.x;
        f.e1 = Vec(3);
        f.e1 << std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th);
        f.e2 = Vec(3);
        f.e2 << -std::sin(ph), std::cos(ph), 0;
        bd = {f.x, direction_3d(f, p[2], p[3])};
        w = std::sin(th) * std::sin(p[2]);
        return true;
    });
    return g;
}

BoundaryGrid BoundaryGrid::cap(Vec const& p_in, double c, int per_axis, double glancing_margin)
{
    if (!(c > 0))
        throw DomainError("cap depth must be positive");
    if (per_axis < 1)
        throw DomainError("boundary grid needs at least one node per axis");
    int d = static_cast<int>(p_in.size());
    Vec p = unit_x(p_in);
    double smax = std::acos(std::max(-1.0, 1.0 - c));
    double bmax = kPi / 2 - glancing_margin;
    auto inside = [p, c](Vec const& y) { return y.dot(p) - 1.0 > -c; };
    BoundaryGrid g;
    g.d = d;
    g.glancing_margin = glancing_margin;
    if (d == 2)
    {
        Vec q(2);
        q << -p[1], p[0];
        g.axes = {{-smax, smax, per_axis, false}, {-bmax, bmax, per_axis, false}};
        fill_grid(g, [&](std::vector<double> const& a, BoundaryDirection& bd, double& w) {
            Vec x = unit_x(std::cos(a[0]) * p + std::sin(a[0]) * q);
            bd = {x, direction_2d(x, a[1])};
            w = 1.0;
            return inside(x) && inside(scattering_relation(bd).x);
        });
        return g;
    }
    if (d != 3)
        throw DomainError("boundary grids support d = 2 or 3");
    RMat basis = orthonormal_complement(p);
    Vec q1 = basis.col(0), q2 = basis.col(1);
    g.axes = {{0, smax, per_axis, false}, {0, 2 * kPi, per_axis, true}, {0, bmax, per_axis, false},
              {0, 2 * kPi, per_axis, true}};
    fill_grid(g, [&](std::vector<double> const& a, BoundaryDirection& bd, double& w) {
        double s = a[0], ph = a[1];
        Vec radial = std::cos(ph) * q1 + std::sin(ph) * q2;
        Frame3 f;
        f.x = unit_x(std::cos(s) * p + std::sin(s) * radial);
        f.n = -f.x;
        f.e1 = -std::sin(s) * p + std::cos(s) * radial;
        f.e2 = -std::sin(ph) * q1 + std::cos(ph) * q2;
        bd = {f.x, direction_3d(f, a[2], a[3])};
        w = std::sin(s) * std::sin(a[2]);
        return inside(f.x) && inside(scattering_relation(bd).x);
    });
    return g;
}

double boundary_l2_norm(std::span<ScatteringRecord const> records)
{
    return std::sqrt(mean_sq_norm(records, nullptr));
}

double boundary_l2_sq_stderr(std::span<ScatteringRecord const> records)
{
    double var = 0;
    mean_sq_norm(records, &var);
    return std::sqrt(var / records.size());
}

double boundary_l2_norm(BoundaryGrid const& g, std::span<CMat const> values)
{
    if (values.size() != g.size())
        throw DomainError("grid values do not match the grid");
    double vol = g.volume();
    if (!(vol > 0))
        throw DomainError("boundary grid has no active nodes");
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.active[i])
            s += g.weights[i] * values[i].squaredNorm();
    return std::sqrt(s / vol);
}

double boundary_h1_norm(BoundaryGrid const& g, std::span<CMat const> values)
{
    if (values.size() != g.size())
        throw DomainError("grid values do not match the grid");
    for (auto const& a : g.axes)
        if (a.n < 8)
            throw DomainError("H1 norm needs at least 8 nodes per axis");
    double vol = g.volume();
    if (!(vol > 0))
        throw DomainError("boundary grid has no active nodes");
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        if (!g.active[i])
            continue;
        double local = values[i].squaredNorm();
        for (int a = 0; a < static_cast<int>(g.axes.size()); ++a)
        {
            double hstep = g.axes[a].spacing();
            std::size_t fw = g.neighbour(i, a, 1);
            std::size_t bw = g.neighbour(i, a, -1);
            bool has_f = fw != BoundaryGrid::npos && g.active[fw];
            bool has_b = bw != BoundaryGrid::npos && g.active[bw];
            if (has_f && has_b)
                local += ((values[fw] - values[bw]) / (2 * hstep)).squaredNorm();
            else if (has_f)
                local += ((values[fw] - values[i]) / hstep).squaredNorm();
            else if (has_b)
                local += ((values[i] - values[bw]) / hstep).squaredNorm();
        }
        s += g.weights[i] * local;
    }
    return std::sqrt(s / vol);
}

//---------------------------------------------------------------------------//

LinfBoundReport check_linf_bound(Attenuation const& att, std::size_t n_dirs, SolverConfig const& cfg,
                                 std::uint64_t seed)
{
    cfg.validate();
    int const m = att.matrix_size();
    int const mm = m * m;
    Rng rng(Rng::seed_for(seed, stream::audit));
    auto bds = sample_boundary_uniform(att.dim(), n_dirs, rng);
    struct Slot
    {
        double sup_a = 0, max_norm = 0, defect = 0;
    };
    std::vector<Slot> slots(bds.size());
    double const root_m = std::sqrt(static_cast<double>(m));
    parallel_for(bds.size(), [&](std::size_t i) {
        auto seg = GeodesicSegment::chord(bds[i].x, bds[i].v, cfg.steps_per_unit);
        Slot s;
        s.max_norm = root_m;
        if (seg.n_steps > 0)
        {
            auto a = sample_attenuation(att, seg.origin, seg.direction, 0.0, 0.5 * seg.step(), 2 * seg.n_steps + 1);
            for (std::size_t q = 0; q < a.size(); q += mm)
            {
                double f = 0;
                for (int e = 0; e < mm; ++e)
                    f += std::norm(a[q + e]);
                s.sup_a = std::max(s.sup_a, std::sqrt(f));
            }
            auto path = rk4_backward(a, m, seg.n_steps, seg.step());
            for (auto const& u : path)
            {
                double nrm = u.norm();
                s.max_norm = std::max(s.max_norm, nrm);
                s.defect = std::max(s.defect, std::abs(nrm - root_m));
            }
        }
        slots[i] = s;
    });
    LinfBoundReport r;
    r.linf = linf_norm(att);
    r.max_norm = root_m;
    for (auto const& s : slots)
    {
        r.linf = std::max(r.linf, s.sup_a);
        r.max_norm = std::max(r.max_norm, s.max_norm);
        r.max_defect = std::max(r.max_defect, s.defect);
    }
    double const tau_inf = 2.0;
    r.bound = root_m * std::exp(tau_inf * r.linf);
    r.margin = r.bound - r.max_norm;
    return r;
}

double data_distance(Attenuation const& phi, Attenuation const& psi, std::span<BoundaryDirection const> bds,
                     SolverConfig const& cfg)
{
    if (bds.empty())
        throw DomainError("data distance needs at least one direction");
    std::vector<double> sq(bds.size());
    parallel_for(bds.size(), [&](std::size_t i) {
        sq[i] = (scattering_value(phi, bds[i], cfg) - scattering_value(psi, bds[i], cfg)).squaredNorm();
    });
    double s = 0;
    for (double x : sq)
        s += x;
    return std::sqrt(s / bds.size());
}

double forward_ratio(PotentialField const& phi, PotentialField const& psi, std::size_t n_dirs,
                     SolverConfig const& cfg, std::uint64_t seed)
{
    double pot = l2_norm_on_ball(phi - psi);
    if (!(pot > 0))
        throw DegenerateInputError("forward_ratio: potentials coincide");
    Rng rng(Rng::seed_for(seed, stream::directions));
    auto bds = sample_boundary_uniform(phi.dim(), n_dirs, rng);
    return data_distance(phi, psi, bds, cfg) / pot;
}

//---------------------------------------------------------------------------//

double layer_identity_residual(Weight const& w, PotentialField const& f, double c, QuadraticRho const& rho,
                               BoundaryDirection const& bd_c, SolverConfig const& cfg)
{
    cfg.validate();
    Vec const& x = bd_c.x;
    Vec const& v = bd_c.v;
    double const tol = 1e-9 * std::max(1.0, std::abs(c));
    if (std::abs(rho(x) - c) > tol)
        throw DomainError("layer_identity_residual: base point is not on the level set");
    if (rho.gradient(x).dot(v) > tol)
        throw DomainError("layer_identity_residual: direction leaves M_c");
    if (x.norm() > 1 + kGeomTol)
        throw DomainError("layer_identity_residual: base point outside the ball");

    // Portion inside M_c: second root of rho(x + t v) = c, clipped to the ball.
    Vec y = x - rho.center;
    double qa = v.dot(rho.hessian_half * v);
    double t_c = std::max(0.0, -2.0 * v.dot(rho.hessian_half * y) / qa);
    double t_end = std::min(t_c, exit_time(x, v));
    auto inner = GeodesicSegment::of_length(x, v, t_end, cfg.steps_per_unit);
    CMat lhs = weighted_integral(w, f, inner);

    // Full chord from beta_c(x, v) with the indicator applied on the grid.
    double back = exit_time(x, Vec(-v));
    Vec x0 = x - back * v;
    x0 /= std::max(1.0, x0.norm());
    auto full = GeodesicSegment::chord(x0, v, cfg.steps_per_unit);
    // nodes on the level set itself count as inside despite rounding
    double const edge = c + 1e-12 * std::max(1.0, std::abs(c));
    CMat rhs = weighted_integral(w, f, full, [&](Vec const& p) { return rho(p) <= edge; });
    return (lhs - rhs).norm();
}

LocalStability local_stability_ratio(Weight const& w, PotentialField const& f, Vec const& p, double c,
                                     int per_axis, SolverConfig const& cfg)
{
    cfg.validate();
    bool zero = std::all_of(f.coeffs().begin(), f.coeffs().end(), [](cplx z) { return z == cplx(0, 0); });
    if (zero)
        throw DegenerateInputError("local_stability_ratio: f = 0");
    LocalStability out;
    {
        BallQuadrature quad;
        auto vals = sample_on_ball(f, 48, p, c / 2, &quad);
        int const mm = f.matrix_size() * f.matrix_size();
        double s = 0;
        for (std::size_t i = 0; i < quad.points.size(); ++i)
        {
            if (quad.points[i].norm() > 1.0)
                continue;
            double n2 = 0;
            for (int e = 0; e < mm; ++e)
                n2 += std::norm(vals[i * mm + e]);
            s += quad.weights[i] * n2;
        }
        out.f_l2 = std::sqrt(s);
    }
    if (!(out.f_l2 > 0))
        throw DegenerateInputError("local_stability_ratio: f vanishes on B(p, c/2)");

    auto grid = BoundaryGrid::cap(p, c, per_axis);
    std::vector<CMat> values(grid.size(), CMat::Zero(f.matrix_size(), f.matrix_size()));
    parallel_for(grid.size(), [&](std::size_t i) {
        if (grid.active[i])
            values[i] = weighted_xray(w, f, grid.nodes[i], cfg);
    });
    out.data_h1 = boundary_h1_norm(grid, values);
    if (!(out.data_h1 > 1e-300))
    {
        out.ratio = std::numeric_limits<double>::infinity();
        out.diagnostic = "transform numerically zero on the cap grid";
        return out;
    }
    out.ratio = out.f_l2 / out.data_h1;
    return out;
}

//---------------------------------------------------------------------------//

LogFit log_log_fit(std::span<double const> x, std::span<double const> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("log_log_fit needs matching inputs of size >= 2");
    std::size_t n = x.size();
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!(x[i] > 0) || !(y[i] > 0))
            throw DomainError("log_log_fit needs positive values");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0))
        throw DomainError("log_log_fit: abscissae coincide");
    LogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        double r = ly[i] - (f.intercept + f.slope * lx[i]);
        ss_res += r * r;
    }
    f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

StabilityFit hoelder_fit(std::span<DistancePair const> pairs)
{
    if (pairs.size() < 3)
        throw DomainError("hoelder_fit needs at least 3 pairs");
    std::vector<double> x, y;
    for (auto const& p : pairs)
    {
        if (!(p.data_dist > 0) || !(p.pot_dist > 0))
            throw DomainError("hoelder_fit needs positive distances");
        x.push_back(p.data_dist);
        y.push_back(p.pot_dist);
    }
    StabilityFit fit;
    fit.pairs.assign(pairs.begin(), pairs.end());
    auto lf = log_log_fit(x, y);
    fit.mu_hat = lf.slope;
    fit.c_hat = std::exp(lf.intercept);
    fit.r2 = lf.r2;

    fit.envelope_c = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 200; ++k)
    {
        double mu = 0.01 * k;
        double cmax = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            cmax = std::max(cmax, y[i] / std::pow(x[i], mu));
        if (cmax < fit.envelope_c)
        {
            fit.envelope_c = cmax;
            fit.envelope_mu = mu;
        }
    }
    return fit;
}

nlohmann::json to_json(StabilityFit const& f)
{
    return {{"mu_hat", f.mu_hat},
            {"c_hat", f.c_hat},
            {"r2", f.r2},
            {"n_pairs", f.pairs.size()},
            {"envelope", {{"mu", f.envelope_mu}, {"c", f.envelope_c}}}};
}
}  // namespace naxray
