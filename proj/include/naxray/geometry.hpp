#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "naxray/rng.hpp"
#include "naxray/types.hpp"

namespace naxray
{
//---------------------------------------------------------------------------//
// Unit-ball model: geodesics are chords, the boundary is the unit sphere and
// the inward normal at x is -x.
//---------------------------------------------------------------------------//

inline constexpr double kGeomTol = 1e-12;

/*!
 * A point of the inward boundary sphere bundle: |x| = 1, |v| = 1, <x,v> <= 0.
 */
struct BoundaryDirection
{
    Vec x;
    Vec v;

    //! Validate and construct; throws DomainError on violation.
    static BoundaryDirection make(Vec x, Vec v);
    int dim() const { return static_cast<int>(x.size()); }
};

//! First time t >= 0 with |x + t v| = 1, for |x| <= 1.
double exit_time(Vec const& x, Vec const& v);

struct ExitState
{
    Vec x;
    Vec v;
};

//! Exit point and direction of the chord started at bd.
ExitState scattering_relation(BoundaryDirection const& bd);

//! Uniform draws on the inward boundary bundle (product of sphere and hemisphere measures).
std::vector<BoundaryDirection> sample_boundary_uniform(int d, std::size_t n, Rng& rng);

/*!
 * A chord x(t) = origin + t * direction on [0, t_exit], split into n_steps
 * equal steps.
 */
struct GeodesicSegment
{
    Vec origin;
    Vec direction;
    double t_exit = 0;
    int n_steps = 0;

    double step() const { return n_steps > 0 ? t_exit / n_steps : 0.0; }
    Vec point(double t) const { return origin + t * direction; }

    //! Chord from x along v to the exit of the ball of given radius, with an
    //! even step count of at least ceil(steps_per_unit * length).
    static GeodesicSegment chord(Vec const& x, Vec const& v, int steps_per_unit, double radius = 1.0);
    //! Segment of given length with an even step count.
    static GeodesicSegment of_length(Vec const& x, Vec const& v, double length, int steps_per_unit);
};

//! Exit time from the ball of given radius (centred at 0) for |x| <= radius.
double exit_time_radius(Vec const& x, Vec const& v, double radius);

/*!
 * Strictly convex quadratic rho(x) = (x - a)^T Q (x - a), Q symmetric
 * positive definite. The default is |x|^2.
 */
struct QuadraticRho
{
    Vec center;
    RMat hessian_half;  //!< Q

    static QuadraticRho isotropic(int d);
    double operator()(Vec const& x) const;
    Vec gradient(Vec const& x) const;
    bool is_isotropic() const;
    //! Smallest eigenvalue of Q; positive for a strictly convex rho.
    double convexity() const;
};

/*!
 * Region of the ball: full ball, superlevel set {rho >= c}, boundary cap
 * {<x,p> - 1 > -c}, or a single point (degenerate compact set).
 */
struct RegionSpec
{
    enum class Kind
    {
        full_ball,
        superlevel,
        boundary_cap,
        point
    };

    Kind kind = Kind::full_ball;
    int d = 3;
    QuadraticRho rho;  //!< used by superlevel
    double level = 0;  //!< c for superlevel and cap
    Vec p;             //!< cap point on the sphere, or the single point

    static RegionSpec full_ball(int d);
    static RegionSpec superlevel(QuadraticRho rho, double c);
    static RegionSpec boundary_cap(Vec p, double c);
    static RegionSpec single_point(Vec p);

    //! Membership for points of the closed ball.
    bool contains(Vec const& x, double tol = kGeomTol) const;
    //! Boundary-defining function x~ = <x,p> - 1 for caps.
    double cap_coordinate(Vec const& x) const;
};

nlohmann::json to_json(RegionSpec const& r);
RegionSpec region_from_json(nlohmann::json const& j);

//! True where every sampled point of the chord lies in the region.
std::vector<bool> geodesics_in_region(RegionSpec const& region,
                                      std::span<BoundaryDirection const> bds,
                                      int points_per_unit = 256);

/*!
 * Layer structure for a strictly convex exhaustion of K.
 *
 * levels[0] = sup_K rho, levels[i] = levels[0] - i * r / 2 for 1 <= i <= N + 1,
 * N = 2 * ceil((sup - inf) / r), so levels[N + 1] < inf_K rho (both equal
 * for a single point). centers[0] are boundary points covering with h-balls;
 * centers[i] (i >= 1) cover slab i with r-balls, taken on {rho = levels[i]}
 * where that level set reaches and from the slab itself near the minimum.
 */
struct Foliation
{
    QuadraticRho rho;
    RegionSpec region;
    double h = 0;
    double r = 0;
    int n_layers = 0;
    std::vector<double> levels;
    std::vector<std::vector<Vec>> centers;
    //! Construction-sample points that could not be covered (|grad rho| < 1 regions).
    std::size_t uncovered = 0;

    //! Slab index i with levels[i] >= rho(x) >= levels[i+1], or -1.
    int slab_of(Vec const& x) const;
    //! True if x is within r (or h for boundary centers) of a center of slab i.
    bool covered(Vec const& x, int slab) const;
};

nlohmann::json to_json(Foliation const& f);

struct StratifyOptions
{
    std::size_t samples_per_slab = 20000;
    std::size_t candidates = 4000;
    std::uint64_t seed = 0;
};

Foliation stratify(RegionSpec const& k, QuadraticRho const& rho, double h, double r,
                   StratifyOptions const& opts = {});

//! Quasi-uniform points on S^{d-1} (Fibonacci lattice for d = 3, equispaced for d = 2).
std::vector<Vec> sphere_points(int d, std::size_t n);

//! Orthonormal basis of the complement of a unit vector (columns).
RMat orthonormal_complement(Vec const& u);
}  // namespace naxray
