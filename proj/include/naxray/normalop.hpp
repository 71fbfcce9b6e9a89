#pragma once

#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "naxray/types.hpp"

namespace naxray
{
/*!
 * W*W sampled at a boundary point over tangential directions omega of
 * S^{d-2}, with the matching quadrature weights.
 */
struct WeightBoundaryData
{
    int d = 3;
    std::vector<Vec> omegas;
    std::vector<double> weights;
    std::vector<CMat> wstar_w;  //!< Hermitian PSD samples
    double winv_linf = 1.0;     //!< sup |W^{-1}| over the samples, +inf if singular

    int matrix_size() const { return wstar_w.empty() ? 0 : static_cast<int>(wstar_w.front().rows()); }
    WeightBoundaryData scaled(double t) const;
};

//! Quadrature rule on S^{d-2}: two points for d = 2, trapezoid on S^1 for d = 3,
//! Gauss-Legendre colatitude times trapezoid azimuth for d = 4.
void sphere_rule(int d, int n, std::vector<Vec>& nodes, std::vector<double>& weights);

//! Samples W(omega) and forms W*W and sup |W^{-1}|_op.
WeightBoundaryData weight_data(int d, int n_quad, std::function<CMat(Vec const&)> const& w);
//! From W*W samples directly; |W^{-1}| = lambda_min(W*W)^{-1/2}.
WeightBoundaryData weight_data_from_gram(int d, int n_quad, std::function<CMat(Vec const&)> const& gram);

struct SymbolQuery
{
    double xi = 0;
    Vec eta;                //!< length d - 1
    double alpha_curv = 1;  //!< constant curvature coefficient
};

//! <xi>^{-1} int W*W exp(-|eta.omega / <xi>|^2 / (2 alpha)) d omega.
CMat symbol_matrix(WeightBoundaryData const& w, SymbolQuery const& q);

//! <(xi, eta)> times the symbol, evaluated through zeta = eta / <xi>:
//! sqrt(1 + |zeta|^2) int W*W exp(-(zeta.omega)^2 / (2 alpha)) d omega.
CMat weighted_symbol_reduced(WeightBoundaryData const& w, Vec const& zeta, double alpha_curv);

struct SymbolGrid
{
    //! Points (xi, eta); the weighted symbol only depends on eta / <xi>.
    std::vector<double> xi;
    std::vector<Vec> eta;
    std::size_t size() const { return xi.size(); }
};

/*!
 * Grid in reduced variables: radii |zeta| on [0, zeta_max] (with the last
 * ring at zeta_max), n_angles directions of zeta, and n_xi values of xi
 * spread over [0, xi_max] on a log scale.
 */
SymbolGrid reduced_grid(int d, int n_xi, int n_zeta, int n_angles, double xi_max = 1e3, double zeta_max = 1e3);

struct MarginReport
{
    double min_eig = 0;
    double margin = 0;
    double lambda0_probe = 0;
    double argmin_xi = 0;
    Vec argmin_eta;
};

MarginReport ellipticity_margin(WeightBoundaryData const& w, SymbolGrid const& grid, double lambda0_probe,
                                double alpha_curv = 1.0);

//! Largest lambda0 with nonnegative margin for every member: min_k min_eig_k |W_k^{-1}|^2.
double calibrate_lambda0(std::span<WeightBoundaryData const> family, SymbolGrid const& grid,
                         double alpha_curv = 1.0);

nlohmann::json to_json(MarginReport const& r);
}  // namespace naxray
