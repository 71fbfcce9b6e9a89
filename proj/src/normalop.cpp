#include "naxray/normalop.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "naxray/errors.hpp"
#include "naxray/parallel.hpp"
#include "naxray/quadrature.hpp"

namespace naxray
{
namespace
{
double min_eigenvalue(CMat const& h)
{
    if (h.rows() == 1)
        return h(0, 0).real();
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

CMat hermitian_part(CMat const& a)
{
    return 0.5 * (a + a.adjoint());
}

double japanese(double x)
{
    return std::sqrt(1.0 + x * x);
}
}  // namespace

WeightBoundaryData WeightBoundaryData::scaled(double t) const
{
    WeightBoundaryData out = *this;
    for (auto& g : out.wstar_w)
        g *= t * t;
    out.winv_linf = winv_linf / std::abs(t);
    return out;
}

void sphere_rule(int d, int n, std::vector<Vec>& nodes, std::vector<double>& weights)
{
    nodes.clear();
    weights.clear();
    if (d == 2)
    {
        for (double s : {-1.0, 1.0})
        {
            Vec w(1);
            w << s;
            nodes.push_back(w);
            weights.push_back(1.0);
        }
        return;
    }
    if (n < 1)
        throw DomainError("sphere rule needs n >= 1");
    if (d == 3)
    {
        for (int i = 0; i < n; ++i)
        {
            double th = 2 * kPi * i / n;
            Vec w(2);
            w << std::cos(th), std::sin(th);
            nodes.push_back(w);
            weights.push_back(2 * kPi / n);
        }
        return;
    }
    if (d == 4)
    {
        // Gauss-Legendre in cos(colatitude) carries the sin factor of the area element.
        int nc = std::max(1, n / 2);
        auto rule = gauss_legendre(nc);
        for (int i = 0; i < nc; ++i)
        {
            double z = rule.nodes[i];
            double s = std::sqrt(std::max(0.0, 1 - z * z));
            for (int j = 0; j < n; ++j)
            {
                double ph = 2 * kPi * j / n;
                Vec w(3);
                w << s * std::cos(ph), s * std::sin(ph), z;
                nodes.push_back(w);
                weights.push_back(rule.weights[i] * 2 * kPi / n);
            }
        }
        return;
    }
    throw DomainError("symbol quadrature supports d in {2, 3, 4}");
}

WeightBoundaryData weight_data(int d, int n_quad, std::function<CMat(Vec const&)> const& w)
{
    WeightBoundaryData out;
    out.d = d;
    sphere_rule(d, n_quad, out.omegas, out.weights);
    double sup = 0;
    for (auto const& om : out.omegas)
    {
        CMat wm = w(om);
        out.wstar_w.push_back(hermitian_part(wm.adjoint() * wm));
        Eigen::JacobiSVD<CMat> svd(wm);
        double smin = svd.singularValues().minCoeff();
        sup = smin > 0 ? std::max(sup, 1.0 / smin) : std::numeric_limits<double>::infinity();
        if (!std::isfinite(sup))
            break;
    }
    out.winv_linf = sup;
    return out;
}

WeightBoundaryData weight_data_from_gram(int d, int n_quad, std::function<CMat(Vec const&)> const& gram)
{
    WeightBoundaryData out;
    out.d = d;
    sphere_rule(d, n_quad, out.omegas, out.weights);
    double sup = 0;
    for (auto const& om : out.omegas)
    {
        CMat g = gram(om);
        if ((g - g.adjoint()).norm() > 1e-10 * std::max(1.0, g.norm()))
            throw DomainError("W*W sample is not Hermitian");
        g = hermitian_part(g);
        double lmin = min_eigenvalue(g);
        if (lmin < -1e-10 * std::max(1.0, g.norm()))
            throw DomainError("W*W sample is not positive semidefinite");
        sup = lmin > 1e-14 * std::max(1.0, g.norm()) ? std::max(sup, 1.0 / std::sqrt(lmin))
                                                     : std::numeric_limits<double>::infinity();
        out.wstar_w.push_back(g);
    }
    out.winv_linf = sup;
    return out;
}

CMat weighted_symbol_reduced(WeightBoundaryData const& w, Vec const& zeta, double alpha_curv)
{
    if (w.wstar_w.empty())
        throw DomainError("symbol needs weight samples");
    if (!(alpha_curv > 0))
        throw DomainError("curvature coefficient must be positive");
    int const m = w.matrix_size();
    CMat acc = CMat::Zero(m, m);
    for (std::size_t i = 0; i < w.omegas.size(); ++i)
    {
        double z = zeta.dot(w.omegas[i]);
        acc += (w.weights[i] * std::exp(-z * z / (2 * alpha_curv))) * w.wstar_w[i];
    }
    return hermitian_part(japanese(zeta.norm()) * acc);
}

CMat symbol_matrix(WeightBoundaryData const& w, SymbolQuery const& q)
{
    if (w.wstar_w.empty())
        throw DomainError("symbol needs weight samples");
    if (q.eta.size() != w.d - 1)
        throw DomainError("eta must have d - 1 components");
    if (!(q.alpha_curv > 0))
        throw DomainError("curvature coefficient must be positive");
    int const m = w.matrix_size();
    double jx = japanese(q.xi);
    Vec zeta = q.eta / jx;
    CMat acc = CMat::Zero(m, m);
    for (std::size_t i = 0; i < w.omegas.size(); ++i)
    {
        double z = zeta.dot(w.omegas[i]);
        acc += (w.weights[i] * std::exp(-z * z / (2 * q.alpha_curv))) * w.wstar_w[i];
    }
    return hermitian_part(acc / jx);
}

SymbolGrid reduced_grid(int d, int n_xi, int n_zeta, int n_angles, double xi_max, double zeta_max)
{
    if (d < 2 || n_xi < 1 || n_zeta < 1 || n_angles < 1)
        throw DomainError("reduced grid needs positive counts");
    std::vector<double> xis;
    for (int i = 0; i < n_xi; ++i)
        xis.push_back(i == 0 ? 0.0 : std::pow(xi_max, static_cast<double>(i) / std::max(1, n_xi - 1)));
    std::vector<double> radii;
    // 0, then log-spaced up to zeta_max
    radii.push_back(0.0);
    for (int i = 1; i < n_zeta; ++i)
        radii.push_back(1e-2 * std::pow(zeta_max / 1e-2, static_cast<double>(i - 1) / std::max(1, n_zeta - 2)));
    std::vector<Vec> dirs;
    if (d == 2)
    {
        for (int a = 0; a < n_angles; ++a)
        {
            Vec u(1);
            u << (a % 2 == 0 ? 1.0 : -1.0);
            dirs.push_back(u);
        }
    }
    else if (d == 3)
    {
        for (int a = 0; a < n_angles; ++a)
        {
            double th = kPi * (a + 0.5) / n_angles;  // symbol is even in zeta
            Vec u(2);
            u << std::cos(th), std::sin(th);
            dirs.push_back(u);
        }
    }
    else
    {
        std::vector<double> w;
        sphere_rule(d, std::max(2, static_cast<int>(std::sqrt(2.0 * n_angles))), dirs, w);
        dirs.resize(std::min<std::size_t>(dirs.size(), n_angles));
    }
    SymbolGrid g;
    for (double xi : xis)
        for (double r : radii)
            for (auto const& u : dirs)
            {
                g.xi.push_back(xi);
                g.eta.push_back(r * japanese(xi) * u);
            }
    return g;
}

MarginReport ellipticity_margin(WeightBoundaryData const& w, SymbolGrid const& grid, double lambda0_probe,
                                double alpha_curv)
{
    if (grid.size() == 0)
        throw DomainError("ellipticity margin needs a nonempty grid");
    if (w.wstar_w.empty())
        throw DomainError("ellipticity margin needs weight samples");
    if (!std::isfinite(w.winv_linf) || !(w.winv_linf > 0))
        throw DegenerateInputError("degenerate weight: W is singular on the sampled set");
    std::vector<double> eig(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        double jx = japanese(grid.xi[i]);
        // <(xi, eta)> a(xi, eta) = sqrt(1 + |zeta|^2) * int ..., zeta = eta / <xi>
        eig[i] = min_eigenvalue(weighted_symbol_reduced(w, grid.eta[i] / jx, alpha_curv));
    });
    MarginReport r;
    r.lambda0_probe = lambda0_probe;
    r.min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (eig[i] < r.min_eig)
        {
            r.min_eig = eig[i];
            r.argmin_xi = grid.xi[i];
            r.argmin_eta = grid.eta[i];
        }
    r.margin = r.min_eig - lambda0_probe / (w.winv_linf * w.winv_linf);
    return r;
}

double calibrate_lambda0(std::span<WeightBoundaryData const> family, SymbolGrid const& grid, double alpha_curv)
{
    if (family.empty())
        throw DomainError("calibrate_lambda0 needs a nonempty family");
    // margin_k(lambda) = min_eig_k - lambda / winv_k^2 is affine, so the root is explicit.
    double best = std::numeric_limits<double>::infinity();
    for (auto const& w : family)
    {
        auto r = ellipticity_margin(w, grid, 0.0, alpha_curv);
        best = std::min(best, r.min_eig * w.winv_linf * w.winv_linf);
    }
    return best;
}

nlohmann::json to_json(MarginReport const& r)
{
    std::vector<double> eta(r.argmin_eta.data(), r.argmin_eta.data() + r.argmin_eta.size());
    return {{"min_eig", r.min_eig},
            {"margin", r.margin},
            {"lambda0_probe", r.lambda0_probe},
            {"argmin", {{"xi", r.argmin_xi}, {"eta", eta}}}};
}
}  // namespace naxray
