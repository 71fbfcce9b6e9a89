#include "naxray/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "naxray/errors.hpp"

namespace naxray
{
namespace
{
// |x|^2 - 1 below this is treated as lying on the sphere
constexpr double kSphereSlack = 8 * std::numeric_limits<double>::epsilon();

Vec random_unit(int d, Rng& rng)
{
    Vec g(d);
    do
    {
        for (int i = 0; i < d; ++i)
            g[i] = rng.normal();
    } while (g.norm() < 1e-300);
    return g / g.norm();
}

Vec random_in_ball(int d, Rng& rng)
{
    Vec u = random_unit(d, rng);
    return std::pow(rng.uniform(), 1.0 / d) * u;
}

char const* kind_name(RegionSpec::Kind k)
{
    switch (k)
    {
        case RegionSpec::Kind::full_ball:
            return "full-ball";
        case RegionSpec::Kind::superlevel:
            return "superlevel";
        case RegionSpec::Kind::boundary_cap:
            return "boundary-cap";
        case RegionSpec::Kind::point:
            return "point";
    }
    return "?";
}

nlohmann::json vec_json(Vec const& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vec json_vec(nlohmann::json const& j)
{
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct RhoRange
{
    double inf;
    double sup;
};

RhoRange ball_range_isotropic(QuadraticRho const& rho)
{
    double q = rho.hessian_half(0, 0);
    double a = rho.center.norm();
    return {q * std::pow(std::max(0.0, a - 1), 2), q * std::pow(1 + a, 2)};
}

RhoRange sampled_range(RegionSpec const& k, QuadraticRho const& rho, std::uint64_t seed)
{
    Rng rng = Rng::derive(seed, stream::audit);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    auto visit = [&](Vec const& x) {
        if (!k.contains(x))
            return;
        double r = rho(x);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    };
    for (auto const& u : sphere_points(k.d, 20000))
        visit(u);
    for (int i = 0; i < 200000; ++i)
        visit(random_in_ball(k.d, rng));
    if (!(lo <= hi))
        throw DomainError("stratify: region has no sampled points");
    return {lo, hi};
}

RhoRange rho_range(RegionSpec const& k, QuadraticRho const& rho, std::uint64_t seed)
{
    if (k.kind == RegionSpec::Kind::point)
    {
        double r = rho(k.p);
        return {r, r};
    }
    if (rho.is_isotropic())
    {
        if (k.kind == RegionSpec::Kind::full_ball)
            return ball_range_isotropic(rho);
        if (k.kind == RegionSpec::Kind::superlevel && k.rho.is_isotropic()
            && (k.rho.center - rho.center).norm() == 0
            && k.rho.hessian_half(0, 0) == rho.hessian_half(0, 0))
        {
            auto b = ball_range_isotropic(rho);
            if (k.level > b.sup)
                throw DomainError("stratify: empty superlevel region");
            return {std::max(b.inf, k.level), b.sup};
        }
    }
    return sampled_range(k, rho, seed);
}

double dist_to_set(Vec const& x, std::vector<Vec> const& pts, std::size_t* arg = nullptr)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        double d = (pts[i] - x).squaredNorm();
        if (d < best)
        {
            best = d;
            if (arg)
                *arg = i;
        }
    }
    return std::sqrt(best);
}

// Greedy cover of `points` by balls of `radius` centred at candidates.
// Returns the chosen centers; `failures` counts points with no candidate in
// reach, unless allow_self lets such a point become a center itself.
std::vector<Vec> greedy_cover(std::vector<Vec> points, std::vector<Vec> const& candidates,
                              double radius, std::size_t& failures, bool allow_self = false)
{
    std::vector<Vec> centers;
    double reach = 0.9 * radius;
    while (!points.empty())
    {
        Vec x = points.front();
        std::size_t arg = 0;
        double dmin = candidates.empty() ? std::numeric_limits<double>::infinity()
                                         : dist_to_set(x, candidates, &arg);
        if (dmin > radius && allow_self)
        {
            centers.push_back(x);
            std::erase_if(points, [&](Vec const& p) { return (p - x).norm() <= reach; });
            continue;
        }
        if (dmin > radius)
        {
            ++failures;
            points.erase(points.begin());
            continue;
        }
        Vec c = candidates[arg];
        double keep = dmin <= reach ? reach : radius;
        centers.push_back(c);
        std::erase_if(points, [&](Vec const& p) { return (p - c).norm() <= keep; });
    }
    return centers;
}
}  // namespace

//---------------------------------------------------------------------------//
BoundaryDirection BoundaryDirection::make(Vec x, Vec v)
{
    if (x.size() != v.size() || x.size() < 2)
        throw DomainError("BoundaryDirection: x and v must share dimension >= 2");
    if (std::abs(x.norm() - 1) > kGeomTol)
        throw DomainError("BoundaryDirection: |x| != 1");
    if (std::abs(v.norm() - 1) > kGeomTol)
        throw DomainError("BoundaryDirection: |v| != 1");
    if (x.dot(v) > kGeomTol)
        throw DomainError("BoundaryDirection: direction points outward");
    return {std::move(x), std::move(v)};
}

double exit_time(Vec const& x, Vec const& v)
{
    return exit_time_radius(x, v, 1.0);
}

double exit_time_radius(Vec const& x, Vec const& v, double radius)
{
    if (x.size() != v.size())
        throw DomainError("exit_time: dimension mismatch");
    if (!x.allFinite() || !v.allFinite())
        throw DomainError("exit_time: non-finite input");
    double r2 = radius * radius;
    double c = (x.squaredNorm() - r2) / r2;
    if (x.norm() > radius * (1 + kGeomTol))
        throw DomainError("exit_time: point outside the ball");
    double b = x.dot(v) / radius;
    double vv = v.squaredNorm();
    if (std::abs(c) <= kSphereSlack)
        return std::max(0.0, -2 * b / vv) * radius;
    // positive root of vv t^2 + 2 b t + c = 0 with c < 0
    double disc = std::sqrt(b * b - vv * c);
    double t = b <= 0 ? (-b + disc) / vv : -c / (b + disc);
    return t * radius;
}

ExitState scattering_relation(BoundaryDirection const& bd)
{
    double t = exit_time(bd.x, bd.v);
    return {bd.x + t * bd.v, bd.v};
}

std::vector<BoundaryDirection> sample_boundary_uniform(int d, std::size_t n, Rng& rng)
{
    if (d < 2)
        throw DomainError("sample_boundary_uniform: dimension must be >= 2");
    std::vector<BoundaryDirection> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        Vec x = random_unit(d, rng);
        Vec v = random_unit(d, rng);
        double s = v.dot(x);
        if (s > 0)
            v -= 2 * s * x;
        v.normalize();
        out.push_back({std::move(x), std::move(v)});
    }
    return out;
}

//---------------------------------------------------------------------------//
GeodesicSegment GeodesicSegment::chord(Vec const& x, Vec const& v, int steps_per_unit, double radius)
{
    double tau = exit_time_radius(x, v, radius);
    return of_length(x, v, tau, steps_per_unit);
}

GeodesicSegment GeodesicSegment::of_length(Vec const& x, Vec const& v, double length, int steps_per_unit)
{
    if (steps_per_unit < 1)
        throw DomainError("GeodesicSegment: steps_per_unit must be positive");
    GeodesicSegment seg;
    seg.origin = x;
    seg.direction = v;
    seg.t_exit = std::max(0.0, length);
    if (seg.t_exit > 0)
    {
        int n = static_cast<int>(std::ceil(steps_per_unit * seg.t_exit - 1e-9));
        n = std::max(n, 2);
        seg.n_steps = n + (n % 2);
    }
    return seg;
}

//---------------------------------------------------------------------------//
QuadraticRho QuadraticRho::isotropic(int d)
{
    return {Vec::Zero(d), RMat::Identity(d, d)};
}

double QuadraticRho::operator()(Vec const& x) const
{
    Vec y = x - center;
    return y.dot(hessian_half * y);
}

Vec QuadraticRho::gradient(Vec const& x) const
{
    return 2 * hessian_half * (x - center);
}

bool QuadraticRho::is_isotropic() const
{
    double q = hessian_half(0, 0);
    return (hessian_half - q * RMat::Identity(hessian_half.rows(), hessian_half.cols())).norm() == 0;
}

double QuadraticRho::convexity() const
{
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (hessian_half + hessian_half.transpose()));
    return es.eigenvalues().minCoeff();
}

//---------------------------------------------------------------------------//
RegionSpec RegionSpec::full_ball(int d)
{
    RegionSpec r;
    r.kind = Kind::full_ball;
    r.d = d;
    r.rho = QuadraticRho::isotropic(d);
    return r;
}

RegionSpec RegionSpec::superlevel(QuadraticRho rho, double c)
{
    RegionSpec r;
    r.kind = Kind::superlevel;
    r.d = static_cast<int>(rho.center.size());
    r.rho = std::move(rho);
    r.level = c;
    return r;
}

RegionSpec RegionSpec::boundary_cap(Vec p, double c)
{
    if (std::abs(p.norm() - 1) > 1e-9)
        throw DomainError("boundary_cap: p must lie on the unit sphere");
    RegionSpec r;
    r.kind = Kind::boundary_cap;
    r.d = static_cast<int>(p.size());
    r.rho = QuadraticRho::isotropic(r.d);
    r.p = p / p.norm();
    r.level = c;
    return r;
}

RegionSpec RegionSpec::single_point(Vec p)
{
    RegionSpec r;
    r.kind = Kind::point;
    r.d = static_cast<int>(p.size());
    r.rho = QuadraticRho::isotropic(r.d);
    r.p = std::move(p);
    return r;
}

double RegionSpec::cap_coordinate(Vec const& x) const
{
    return x.dot(p) - 1;
}

bool RegionSpec::contains(Vec const& x, double tol) const
{
    if (x.squaredNorm() > 1 + tol)
        return false;
    switch (kind)
    {
        case Kind::full_ball:
            return true;
        case Kind::superlevel:
            return rho(x) >= level - tol;
        case Kind::boundary_cap:
            return cap_coordinate(x) > -level - tol;
        case Kind::point:
            return (x - p).norm() <= tol;
    }
    return false;
}

nlohmann::json to_json(RegionSpec const& r)
{
    nlohmann::json params = nlohmann::json::object();
    params["d"] = r.d;
    switch (r.kind)
    {
        case RegionSpec::Kind::full_ball:
            break;
        case RegionSpec::Kind::superlevel:
        {
            params["c"] = r.level;
            params["rho_center"] = vec_json(r.rho.center);
            std::vector<double> q(r.rho.hessian_half.data(),
                                  r.rho.hessian_half.data() + r.rho.hessian_half.size());
            params["rho_hessian"] = q;
            break;
        }
        case RegionSpec::Kind::boundary_cap:
            params["c"] = r.level;
            params["p"] = vec_json(r.p);
            break;
        case RegionSpec::Kind::point:
            params["p"] = vec_json(r.p);
            break;
    }
    return {{"kind", kind_name(r.kind)}, {"params", params}};
}

RegionSpec region_from_json(nlohmann::json const& j)
{
    auto kind = j.at("kind").get<std::string>();
    auto const& params = j.at("params");
    int d = params.at("d").get<int>();
    if (kind == "full-ball")
        return RegionSpec::full_ball(d);
    if (kind == "superlevel")
    {
        QuadraticRho rho;
        rho.center = json_vec(params.at("rho_center"));
        auto q = params.at("rho_hessian").get<std::vector<double>>();
        if (static_cast<int>(q.size()) != d * d)
            throw IoError("region: rho_hessian must have d*d entries");
        rho.hessian_half = Eigen::Map<RMat>(q.data(), d, d);
        return RegionSpec::superlevel(std::move(rho), params.at("c").get<double>());
    }
    if (kind == "boundary-cap")
        return RegionSpec::boundary_cap(json_vec(params.at("p")), params.at("c").get<double>());
    if (kind == "point")
        return RegionSpec::single_point(json_vec(params.at("p")));
    throw IoError("region: unknown kind '" + kind + "'");
}

std::vector<bool> geodesics_in_region(RegionSpec const& region,
                                      std::span<BoundaryDirection const> bds,
                                      int points_per_unit)
{
    std::vector<bool> mask(bds.size(), false);
    for (std::size_t i = 0; i < bds.size(); ++i)
    {
        auto const& bd = bds[i];
        double tau = exit_time(bd.x, bd.v);
        int n = std::max(1, static_cast<int>(std::ceil(points_per_unit * tau)));
        bool inside = true;
        for (int j = 0; j <= n && inside; ++j)
            inside = region.contains(bd.x + (tau * j / n) * bd.v, 1e-12);
        mask[i] = inside;
    }
    return mask;
}

//---------------------------------------------------------------------------//
std::vector<Vec> sphere_points(int d, std::size_t n)
{
    std::vector<Vec> pts;
    pts.reserve(n);
    if (d == 2)
    {
        for (std::size_t j = 0; j < n; ++j)
        {
            double a = 2 * kPi * j / n;
            Vec u(2);
            u << std::cos(a), std::sin(a);
            pts.push_back(u);
        }
        return pts;
    }
    if (d == 3)
    {
        double golden = kPi * (3 - std::sqrt(5.0));
        for (std::size_t j = 0; j < n; ++j)
        {
            double z = 1 - 2 * (j + 0.5) / n;
            double rr = std::sqrt(std::max(0.0, 1 - z * z));
            double a = golden * j;
            Vec u(3);
            u << rr * std::cos(a), rr * std::sin(a), z;
            pts.push_back(u);
        }
        return pts;
    }
    Rng rng(0x5EEDu + d);
    for (std::size_t j = 0; j < n; ++j)
        pts.push_back(random_unit(d, rng));
    return pts;
}

RMat orthonormal_complement(Vec const& u)
{
    Eigen::Index d = u.size();
    Eigen::HouseholderQR<RMat> qr(u.normalized());
    RMat q = qr.householderQ() * RMat::Identity(d, d);
    return q.rightCols(d - 1);
}

//---------------------------------------------------------------------------//
int Foliation::slab_of(Vec const& x) const
{
    double v = rho(x);
    int n = static_cast<int>(levels.size()) - 1;
    for (int i = 0; i < n; ++i)
    {
        double hi = levels[i];
        double lo = std::max(levels[i + 1], levels.back());
        if (v <= hi + 1e-12 && v >= lo - 1e-12)
            return i;
    }
    return -1;
}

bool Foliation::covered(Vec const& x, int slab) const
{
    if (!centers.empty() && !centers[0].empty() && dist_to_set(x, centers[0]) <= h)
        return true;
    if (slab >= 1 && slab < static_cast<int>(centers.size()) && !centers[slab].empty())
        return dist_to_set(x, centers[slab]) <= r;
    return false;
}

nlohmann::json to_json(Foliation const& f)
{
    auto region = to_json(f.region);
    nlohmann::json centers = nlohmann::json::array();
    for (auto const& layer : f.centers)
    {
        nlohmann::json row = nlohmann::json::array();
        for (auto const& c : layer)
            row.push_back(vec_json(c));
        centers.push_back(row);
    }
    return {{"kind", region["kind"]},
            {"params", region["params"]},
            {"levels", f.levels},
            {"centers", centers},
            {"h", f.h},
            {"r", f.r},
            {"n_layers", f.n_layers},
            {"uncovered", f.uncovered}};
}

Foliation stratify(RegionSpec const& k, QuadraticRho const& rho, double h, double r, StratifyOptions const& opts)
{
    if (!(h > 0) || !(r > 0) || r > h)
        throw DomainError("stratify: need 0 < r <= h");
    if (!(rho.convexity() > 0))
        throw DomainError("stratify: rho is not strictly convex");
    auto range = rho_range(k, rho, opts.seed);
    if (!std::isfinite(range.inf) || !std::isfinite(range.sup))
        throw DomainError("stratify: non-finite rho values");

    Foliation f;
    f.rho = rho;
    f.region = k;
    f.h = h;
    f.r = r;
    double spread = range.sup - range.inf;
    f.n_layers = spread > 0 ? 2 * static_cast<int>(std::ceil(spread / r)) : 0;
    f.levels.push_back(range.sup);
    for (int i = 1; i <= f.n_layers; ++i)
        f.levels.push_back(range.sup - i * (r / 2));
    // spacing r/2 continues through the last level, which sits at or below inf rho
    f.levels.push_back(f.n_layers > 0 ? std::min(range.inf, f.levels.back() - r / 2) : range.inf);

    int n_slabs = f.n_layers + 1;
    f.centers.assign(n_slabs, {});
    if (k.kind == RegionSpec::Kind::point)
    {
        f.centers[0].push_back(k.p);
        return f;
    }

    // construction sample
    Rng rng = Rng::derive(opts.seed, stream::audit + 100);
    std::vector<std::vector<Vec>> slab_points(n_slabs);
    std::size_t budget = opts.samples_per_slab * n_slabs;
    for (std::size_t s = 0, tries = 0; s < budget && tries < 50 * budget; ++tries)
    {
        Vec x = random_in_ball(k.d, rng);
        if (!k.contains(x))
            continue;
        int i = f.slab_of(x);
        if (i < 0)
            continue;
        slab_points[i].push_back(x);
        ++s;
    }

    std::vector<Vec> boundary_candidates;
    for (auto const& u : sphere_points(k.d, opts.candidates))
        if (k.contains(u))
            boundary_candidates.push_back(u);

    Eigen::SelfAdjointEigenSolver<RMat> es(rho.hessian_half);
    RMat q_inv_half = es.operatorInverseSqrt();

    std::vector<Vec> need_boundary;
    for (int i = 0; i < n_slabs; ++i)
    {
        std::vector<Vec> need_level;
        for (auto const& x : slab_points[i])
        {
            if (i == 0 || 1 - x.norm() < h / 2)
                need_boundary.push_back(x);
            else
                need_level.push_back(x);
        }
        if (need_level.empty())
            continue;
        double c = f.levels[i];
        std::vector<Vec> candidates;
        if (c <= 0)
        {
            candidates.push_back(rho.center);
        }
        else
        {
            for (auto const& u : sphere_points(k.d, opts.candidates))
            {
                Vec y = rho.center + std::sqrt(c) * (q_inv_half * u);
                if (k.contains(y))
                    candidates.push_back(y);
            }
        }
        f.centers[i] = greedy_cover(std::move(need_level), candidates, r, f.uncovered, true);
    }
    f.centers[0] = greedy_cover(std::move(need_boundary), boundary_candidates, h, f.uncovered);
    return f;
}
}  // namespace naxray
