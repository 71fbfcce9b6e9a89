#pragma once

#include <functional>
#include <span>
#include <vector>

#include "naxray/fields.hpp"
#include "naxray/geometry.hpp"

namespace naxray
{
struct SolverConfig
{
    int steps_per_unit = 256;
    //! Also solve at half the step and report |U_h(0) - U_{h/2}(0)|_F / 15.
    bool richardson = false;

    void validate() const;
};

/*!
 * Solution of U' + A U = 0 on a chord, U(tau) = Id.
 */
struct MatrixPath
{
    std::vector<double> times;
    std::vector<CMat> values;
    double error_estimate = 0;  //!< Richardson estimate for U(0), if requested

    CMat const& initial() const { return values.front(); }
};

struct ScatteringRecord
{
    BoundaryDirection bd;
    CMat value;
};

//! Attenuation samples A(x + t v, v) for t = t0 + j dt, j < count; row-major m*m blocks.
std::vector<cplx> sample_attenuation(Attenuation const& att, Vec const& x, Vec const& v, double t0, double dt,
                                     int count);

//! Backward fixed-step RK4 over n_steps steps of width h, given A at the 2 n_steps + 1
//! half-step nodes (index 2j is t = j h). Returns U at the n_steps + 1 nodes.
std::vector<CMat> rk4_backward(std::span<cplx const> a_half, int m, int n_steps, double h);

MatrixPath solve_transport(Attenuation const& att, GeodesicSegment const& seg, SolverConfig const& cfg = {});

//! Companion equation V' = V A with V(tau) = Id; V(t) = U(t)^{-1}.
MatrixPath solve_inverse_transport(Attenuation const& att, GeodesicSegment const& seg,
                                   SolverConfig const& cfg = {});

//! U(0) on the chord of bd.
CMat scattering_value(Attenuation const& att, BoundaryDirection const& bd, SolverConfig const& cfg = {});

std::vector<ScatteringRecord> scattering_data(Attenuation const& att, std::span<BoundaryDirection const> bds,
                                              SolverConfig const& cfg = {});

/*!
 * Integrating factor of the cutoff extension to the ball of radius 1 + delta.
 *
 * Solves R' + A_1 R = 0 forward from x along v on the grid t_j = j h up to the
 * first node past the exit of the enlarged ball, where R = Id. Entry j is
 * R(x + j h v, v).
 */
std::vector<CMat> integrating_factor_path(Attenuation const& att, Vec const& x, Vec const& v, double delta,
                                          double h);

//! R(x, v) for an interior point |x| <= 1.
CMat integrating_factor(Attenuation const& att, Vec const& x, Vec const& v, double delta = 0.25,
                        SolverConfig const& cfg = {});

//---------------------------------------------------------------------------//
// Weighted linear transform
//---------------------------------------------------------------------------//

/*!
 * A weight W(x, v) acting on matrix values; applied in place.
 */
struct Weight
{
    std::function<void(Vec const& x, Vec const& v, CMat& value)> apply;

    static Weight identity();
    //! Left multiplication by a matrix function.
    static Weight left(std::function<CMat(Vec const&, Vec const&)> w);
    //! A -> L(x, v) A R(x, v).
    static Weight conjugation(std::function<CMat(Vec const&, Vec const&)> l,
                              std::function<CMat(Vec const&, Vec const&)> r);
    //! Operator on C^{m*m} (row-major vectorisation).
    static Weight linear(std::function<CMat(Vec const&, Vec const&)> op);

    Weight scaled(double t) const;
};

//! Simpson quadrature of W f along seg. mask, when given, zeroes nodes where it is false.
CMat weighted_integral(Weight const& w, PotentialField const& f, GeodesicSegment const& seg,
                       std::function<bool(Vec const&)> const& mask = {});

CMat weighted_xray(Weight const& w, PotentialField const& f, BoundaryDirection const& bd,
                   SolverConfig const& cfg = {});

/*!
 * |C_Phi - C_Psi - R_Phi(0) [int R_Phi^{-1} (Phi - Psi) R_Psi dt] R_Psi(tau)^{-1}|_F
 * along the chord of bd, with both integrating factors built on the solver grid.
 */
double pseudolin_residual(Attenuation const& phi, Attenuation const& psi, BoundaryDirection const& bd,
                          double delta = 0.25, SolverConfig const& cfg = {});
}  // namespace naxray
