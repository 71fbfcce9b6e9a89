#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "naxray/transport.hpp"

namespace naxray
{
//---------------------------------------------------------------------------//
// Boundary grids
//---------------------------------------------------------------------------//

/*!
 * Product chart over inward boundary directions.
 *
 * Boundary points use spherical angles (full sphere) or polar angles around
 * a cap point p; directions use the angle from the inward normal -x plus an
 * azimuth. Nodes are cell midpoints, and the normal angle stops at
 * pi/2 - glancing_margin, so no node is glancing. For caps, nodes whose chord
 * leaves the cap are flagged inactive.
 */
struct BoundaryGrid
{
    struct Axis
    {
        double lo = 0;
        double hi = 0;
        int n = 0;
        bool periodic = false;

        double spacing() const { return (hi - lo) / n; }
        double node(int i) const { return lo + (i + 0.5) * spacing(); }
    };

    int d = 3;
    std::vector<Axis> axes;
    std::vector<BoundaryDirection> nodes;  //!< flattened, last axis fastest
    std::vector<double> weights;           //!< chart volume density times cell size
    std::vector<bool> active;
    double glancing_margin = 0;

    std::size_t size() const { return nodes.size(); }
    double volume() const;
    //! Flat index of a multi-index, or npos when out of range on a non-periodic axis.
    std::size_t neighbour(std::size_t flat, int axis, int step) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    //! Whole inward bundle of the unit sphere, per_axis nodes on each chart axis.
    static BoundaryGrid full(int d, int per_axis, double glancing_margin = 0.0);
    //! Directions whose chords stay in the cap {<x,p> - 1 > -c}.
    static BoundaryGrid cap(Vec const& p, double c, int per_axis, double glancing_margin = 0.05);
};

//! Sqrt of the normalised-volume mean of |F|_F^2 over Monte Carlo records.
double boundary_l2_norm(std::span<ScatteringRecord const> records);
//! Standard error of the squared norm estimate above (for agreement checks).
double boundary_l2_sq_stderr(std::span<ScatteringRecord const> records);
//! Grid form; values holds one matrix per grid node (inactive nodes ignored).
double boundary_l2_norm(BoundaryGrid const& g, std::span<CMat const> values);
//! Chart H^1: L^2 plus central-difference chart derivatives (one-sided at edges).
double boundary_h1_norm(BoundaryGrid const& g, std::span<CMat const> values);

//---------------------------------------------------------------------------//
// Forward bounds
//---------------------------------------------------------------------------//

struct LinfBoundReport
{
    double linf = 0;        //!< sup |A| from the grid and every sampled chord value
    double bound = 0;       //!< sqrt(m) exp(tau_inf |A|_inf)
    double max_norm = 0;    //!< max over paths and times of |U(t)|_F
    double margin = 0;      //!< bound - max_norm
    double max_defect = 0;  //!< max | |U(t)|_F - sqrt(m) |
};

LinfBoundReport check_linf_bound(Attenuation const& att, std::size_t n_dirs, SolverConfig const& cfg = {},
                                 std::uint64_t seed = 0);

//! |C_Phi - C_Psi|_{L^2} / |Phi - Psi|_{L^2(M)} with n_dirs uniform directions.
double forward_ratio(PotentialField const& phi, PotentialField const& psi, std::size_t n_dirs,
                     SolverConfig const& cfg = {}, std::uint64_t seed = 0);

//! Boundary L^2 distance of two scattering data sets on the same directions.
double data_distance(Attenuation const& phi, Attenuation const& psi, std::span<BoundaryDirection const> bds,
                     SolverConfig const& cfg = {});

//---------------------------------------------------------------------------//
// Layers and local stability
//---------------------------------------------------------------------------//

/*!
 * |I^c_W f(x, v) - I_W(1_{M_c} f)(beta_c(x, v))|_F for M_c = {rho <= c}.
 *
 * The left side integrates over the chord portion inside M_c on its own grid;
 * the right side runs the full chord from the boundary with a sharp mask.
 */
double layer_identity_residual(Weight const& w, PotentialField const& f, double c, QuadraticRho const& rho,
                               BoundaryDirection const& bd_c, SolverConfig const& cfg = {});

struct LocalStability
{
    double ratio = 0;
    double f_l2 = 0;
    double data_h1 = 0;
    std::string diagnostic;
};

/*!
 * |f|_{L^2(B(p, c/2))} / |I_W f|_{H^1} over the cap {<x,p> - 1 > -c}.
 * A numerically zero transform gives ratio = +inf with a diagnostic.
 */
LocalStability local_stability_ratio(Weight const& w, PotentialField const& f, Vec const& p, double c,
                                     int per_axis = 10, SolverConfig const& cfg = {});

//---------------------------------------------------------------------------//
// Hoelder fit
//---------------------------------------------------------------------------//

struct DistancePair
{
    double data_dist = 0;
    double pot_dist = 0;
};

struct StabilityFit
{
    std::vector<DistancePair> pairs;
    double mu_hat = 0;
    double c_hat = 0;
    double r2 = 0;
    //! Envelope: the mu on the grid with the smallest C such that all pot <= C data^mu.
    double envelope_mu = 0;
    double envelope_c = 0;
};

StabilityFit hoelder_fit(std::span<DistancePair const> pairs);
nlohmann::json to_json(StabilityFit const& f);

//! Least-squares slope of log(y) on log(x); also returns the intercept.
struct LogFit
{
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};
LogFit log_log_fit(std::span<double const> x, std::span<double const> y);
}  // namespace naxray
