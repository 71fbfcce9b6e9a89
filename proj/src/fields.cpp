#include "naxray/fields.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "naxray/errors.hpp"
#include "naxray/quadrature.hpp"

namespace naxray
{
namespace
{
using CMap = Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>>;
using CMapC = Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> const>;

std::size_t ipow(int base, int exp)
{
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i)
        r *= static_cast<std::size_t>(base);
    return r;
}

double psi(double t)
{
    return t > 0 ? std::exp(-1.0 / t) : 0.0;
}

// Per-axis factors exp(i pi k x / L) * (i pi k / L)^order.
void axis_weights(int n, int offset, double L, double x, int order, cplx* w)
{
    double const base = kPi / L;
    for (int i = 0; i < n; ++i)
    {
        double k = static_cast<double>(i - offset);
        cplx e = std::polar(1.0, base * k * x);
        if (order > 0)
            e *= std::pow(cplx(0.0, base * k), order);
        w[i] = e;
    }
}

/*
 * Pass over a nested grid: the nodes of axis a are produced from the
 * coordinates of axes < a. Each axis contracts one tensor index, so a grid of
 * G^d points costs about sum_a G^(a+1) n^(d-a) m^2 operations.
 */
using NodeFn = std::function<void(int axis, double const* prefix, std::vector<double>& nodes,
                                  std::vector<double>& weights)>;
using VisitFn = std::function<void(double const* x, double weight, cplx const* value)>;

void nested_pass(PotentialField const& f, int const* orders, NodeFn const& node_fn, VisitFn const& visit,
                 bool apply_window)
{
    int const d = f.dim();
    int const n = f.modes();
    int const mm = f.matrix_size() * f.matrix_size();
    int const offset = f.index_of(0);
    std::vector<std::vector<cplx>> stage(d);
    for (int a = 0; a < d; ++a)
        stage[a].resize(ipow(n, d - a - 1) * mm);
    std::vector<cplx> w(n);
    std::vector<double> x(d);
    std::vector<cplx> leaf(mm);
    bool const real = is_real(f.structure());

    std::function<void(int, cplx const*, double)> recurse = [&](int axis, cplx const* src, double wprod) {
        std::vector<double> nodes, weights;
        node_fn(axis, x.data(), nodes, weights);
        std::size_t rest = ipow(n, d - axis - 1) * mm;
        CMapC src_map(src, static_cast<Eigen::Index>(rest), n);
        for (std::size_t j = 0; j < nodes.size(); ++j)
        {
            x[axis] = nodes[j];
            axis_weights(n, offset, f.half_width(), nodes[j], orders ? orders[axis] : 0, w.data());
            CMap dst(stage[axis].data(), static_cast<Eigen::Index>(rest), 1);
            dst.noalias() = src_map * Eigen::Map<Eigen::VectorXcd const>(w.data(), n);
            double wj = wprod * weights[j];
            if (axis + 1 < d)
            {
                recurse(axis + 1, stage[axis].data(), wj);
                continue;
            }
            double win = apply_window ? f.cutoff()(x.data()) : 1.0;
            for (int e = 0; e < mm; ++e)
            {
                cplx v = stage[axis][e] * win;
                leaf[e] = real ? cplx(v.real(), 0.0) : v;
            }
            visit(x.data(), wj, leaf.data());
        }
    };
    recurse(0, f.coeffs().data(), 1.0);
}

// Nested Gauss on the ball with x = c + s sin(u) per axis: the chord-length
// factors sqrt(r^2 - ...) of the outer integrals become smooth in u.
NodeFn ball_gauss_nodes(int order, Vec const& center, double radius)
{
    auto rule = std::make_shared<QuadratureRule>(gauss_legendre(order, -0.5 * kPi, 0.5 * kPi));
    return [rule, center, radius](int axis, double const* prefix, std::vector<double>& nodes,
                                  std::vector<double>& weights) {
        double r2 = radius * radius;
        for (int b = 0; b < axis; ++b)
            r2 -= (prefix[b] - center[b]) * (prefix[b] - center[b]);
        double s = std::sqrt(std::max(r2, 0.0));
        nodes.resize(rule->nodes.size());
        weights.resize(rule->nodes.size());
        for (std::size_t i = 0; i < rule->nodes.size(); ++i)
        {
            nodes[i] = center[axis] + s * std::sin(rule->nodes[i]);
            weights[i] = s * std::cos(rule->nodes[i]) * rule->weights[i];
        }
    };
}

NodeFn ball_uniform_nodes(int grid)
{
    int const g = std::max(grid, 2);
    return [g](int axis, double const* prefix, std::vector<double>& nodes, std::vector<double>& weights) {
        double r2 = 1.0 + 1e-12;
        for (int b = 0; b < axis; ++b)
            r2 -= prefix[b] * prefix[b];
        nodes.clear();
        weights.clear();
        for (int j = 0; j < g; ++j)
        {
            double t = -1.0 + 2.0 * j / (g - 1);
            if (t * t <= r2)
            {
                nodes.push_back(t);
                weights.push_back(1.0);
            }
        }
    };
}

double frob(cplx const* v, int mm)
{
    double s = 0;
    for (int e = 0; e < mm; ++e)
        s += std::norm(v[e]);
    return std::sqrt(s);
}

// All multi-indices of length d with total order k.
void multi_indices(int d, int k, std::vector<int>& cur, std::vector<std::vector<int>>& out)
{
    if (static_cast<int>(cur.size()) == d - 1)
    {
        cur.push_back(k);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int j = 0; j <= k; ++j)
    {
        cur.push_back(j);
        multi_indices(d, k - j, cur, out);
        cur.pop_back();
    }
}
}  // namespace

//---------------------------------------------------------------------------//

std::string to_string(Structure s)
{
    switch (s)
    {
        case Structure::general_complex: return "general-complex";
        case Structure::general_real: return "general-real";
        case Structure::skew_symmetric: return "skew-symmetric";
        case Structure::skew_hermitian: return "skew-hermitian";
    }
    return "general-complex";
}

Structure structure_from_string(std::string const& s)
{
    if (s == "general-complex")
        return Structure::general_complex;
    if (s == "general-real")
        return Structure::general_real;
    if (s == "skew-symmetric")
        return Structure::skew_symmetric;
    if (s == "skew-hermitian")
        return Structure::skew_hermitian;
    throw DomainError("unknown structure '" + s + "'");
}

bool is_real(Structure s)
{
    return s == Structure::general_real || s == Structure::skew_symmetric;
}

double smooth_step(double s)
{
    if (s <= 0)
        return 1.0;
    if (s >= 1)
        return 0.0;
    double a = psi(1.0 - s);
    return a / (a + psi(s));
}

double Cutoff::profile(double dist) const
{
    if (!active())
        return 1.0;
    return smooth_step((dist - radius) / delta);
}

double Cutoff::operator()(double const* x) const
{
    if (!active())
        return 1.0;
    double s = 0;
    for (Eigen::Index a = 0; a < center.size(); ++a)
        s += (x[a] - center[a]) * (x[a] - center[a]);
    return profile(std::sqrt(s));
}

double Cutoff::operator()(Vec const& x) const
{
    return (*this)(x.data());
}

//---------------------------------------------------------------------------//

PotentialField::PotentialField(int d, int m, int modes, double half_width, Structure structure)
    : d_(d), m_(m), n_(modes), offset_((modes - 1) / 2), L_(half_width), structure_(structure)
{
    if (d < 1 || m < 1 || modes < 1)
        throw DomainError("field needs d, m, modes >= 1");
    if (m > kMaxMatrixSize)
        throw DomainError("matrix size above " + std::to_string(kMaxMatrixSize));
    if (!(half_width > 1.0))
        throw DomainError("box half-width must exceed 1");
    n_modes_ = ipow(n_, d_);
    coeffs_.assign(n_modes_ * m_ * m_, cplx(0, 0));
    cutoff_.center = Vec::Zero(d_);
}

PotentialField PotentialField::constant(int d, int modes, double half_width, CMat const& value,
                                        Structure structure)
{
    PotentialField f(d, static_cast<int>(value.rows()), modes, half_width, structure);
    std::vector<int> idx(d, f.index_of(0));
    std::size_t dc = f.flat_index(idx);
    for (int i = 0; i < f.m_; ++i)
        for (int j = 0; j < f.m_; ++j)
            f.coeff(dc, i, j) = value(i, j);
    return f;
}

void PotentialField::set_cutoff(Cutoff c)
{
    if (c.center.size() == 0)
        c.center = Vec::Zero(d_);
    if (c.center.size() != d_)
        throw DomainError("cutoff center dimension mismatch");
    if (c.delta < 0 || c.radius <= 0)
        throw DomainError("cutoff needs radius > 0 and delta >= 0");
    cutoff_ = std::move(c);
}

std::size_t PotentialField::flat_index(std::span<int const> idx) const
{
    std::size_t flat = 0;
    for (int a = 0; a < d_; ++a)
        flat = flat * n_ + idx[a];
    return flat;
}

void PotentialField::unflatten(std::size_t flat, std::span<int> idx) const
{
    for (int a = d_ - 1; a >= 0; --a)
    {
        idx[a] = static_cast<int>(flat % n_);
        flat /= n_;
    }
}

std::size_t PotentialField::mirror(std::size_t flat) const
{
    std::size_t out = 0;
    std::size_t stride = n_modes_;
    for (int a = 0; a < d_; ++a)
    {
        stride /= n_;
        int i = static_cast<int>((flat / stride) % n_);
        int j = index_of(-frequency(i));
        if (j < 0 || j >= n_)
            return npos;
        out = out * n_ + j;
    }
    return out;
}

void PotentialField::contract(double const* x, int const* orders, cplx* out, std::vector<cplx>& scratch) const
{
    // Kronecker weight vector over all modes, then out = C * w.
    std::vector<cplx> w(n_);
    scratch.assign(n_modes_, cplx(1, 0));
    std::size_t block = n_modes_;
    for (int a = 0; a < d_; ++a)
    {
        axis_weights(n_, offset_, L_, x[a], orders ? orders[a] : 0, w.data());
        std::size_t inner = block / n_;
        for (std::size_t q = 0; q < n_modes_; ++q)
            scratch[q] *= w[(q / inner) % n_];
        block = inner;
    }
    int const mm = m_ * m_;
    CMapC c(coeffs_.data(), mm, static_cast<Eigen::Index>(n_modes_));
    Eigen::Map<Eigen::VectorXcd> o(out, mm);
    o.noalias() = c * Eigen::Map<Eigen::VectorXcd const>(scratch.data(), static_cast<Eigen::Index>(n_modes_));
}

void PotentialField::evaluate_into(double const* x, cplx* out) const
{
    int const mm = m_ * m_;
    double win = cutoff_(x);
    if (win == 0.0)
    {
        std::fill(out, out + mm, cplx(0, 0));
        return;
    }
    std::vector<cplx> scratch;
    contract(x, nullptr, out, scratch);
    bool const real = is_real(structure_);
    for (int e = 0; e < mm; ++e)
    {
        out[e] *= win;
        if (real)
            out[e] = cplx(out[e].real(), 0.0);
    }
}

CMat PotentialField::evaluate(Vec const& x) const
{
    if (x.size() != d_)
        throw DomainError("point dimension mismatch");
    std::vector<cplx> buf(m_ * m_);
    evaluate_into(x.data(), buf.data());
    CMat out(m_, m_);
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j)
            out(i, j) = buf[i * m_ + j];
    return out;
}

void PotentialField::evaluate_along(Vec const& origin, Vec const& dir, double t0, double dt, int count,
                                    cplx* out) const
{
    // Builds the n^d x count weight matrix column by column and applies one GEMM.
    // Per-axis phases advance by a fixed factor from node to node; exact phases
    // are recomputed every kResync nodes so the recurrence drift stays at roundoff.
    constexpr int kResync = 32;
    int const mm = m_ * m_;
    if (count <= 0)
        return;
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> wmat(static_cast<Eigen::Index>(n_modes_), count);
    std::vector<double> win(count);
    std::vector<cplx> phase(static_cast<std::size_t>(d_) * n_), step(phase.size());
    for (int a = 0; a < d_; ++a)
        axis_weights(n_, offset_, L_, dir[a] * dt, 0, &step[a * n_]);
    std::vector<double> x(d_);
    for (int j = 0; j < count; ++j)
    {
        double t = t0 + j * dt;
        for (int a = 0; a < d_; ++a)
            x[a] = origin[a] + t * dir[a];
        win[j] = cutoff_(x.data());
        if (j % kResync == 0)
            for (int a = 0; a < d_; ++a)
                axis_weights(n_, offset_, L_, x[a], 0, &phase[a * n_]);
        else
            for (std::size_t q = 0; q < phase.size(); ++q)
                phase[q] *= step[q];
        // Kronecker product over axes, axis 0 slowest, expanded in place
        cplx* col = wmat.col(j).data();
        col[0] = cplx(1, 0);
        std::size_t size = 1;
        for (int a = 0; a < d_; ++a)
        {
            cplx const* w = &phase[a * n_];
            for (std::size_t q = size; q-- > 0;)
            {
                cplx const cq = col[q];
                for (int i = n_ - 1; i >= 0; --i)
                    col[q * n_ + i] = cq * w[i];
            }
            size *= n_;
        }
    }
    CMapC c(coeffs_.data(), mm, static_cast<Eigen::Index>(n_modes_));
    CMap o(out, mm, count);
    o.noalias() = c * wmat;
    bool const real = is_real(structure_);
    for (int j = 0; j < count; ++j)
        for (int e = 0; e < mm; ++e)
        {
            cplx& v = out[j * mm + e];
            v *= win[j];
            if (real)
                v = cplx(v.real(), 0.0);
        }
}

CMat PotentialField::derivative(Vec const& x, std::span<int const> order) const
{
    if (x.size() != d_ || static_cast<int>(order.size()) != d_)
        throw DomainError("derivative order dimension mismatch");
    std::vector<cplx> buf(m_ * m_), scratch;
    contract(x.data(), order.data(), buf.data(), scratch);
    CMat out(m_, m_);
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j)
            out(i, j) = is_real(structure_) ? cplx(buf[i * m_ + j].real(), 0) : buf[i * m_ + j];
    return out;
}

bool PotentialField::same_shape(PotentialField const& o) const
{
    return d_ == o.d_ && m_ == o.m_ && n_ == o.n_ && L_ == o.L_;
}

namespace
{
Structure combined(Structure a, Structure b)
{
    if (a == b)
        return a;
    if (is_real(a) && is_real(b))
        return Structure::general_real;
    return Structure::general_complex;
}

void check_compatible(PotentialField const& a, PotentialField const& b)
{
    if (!a.same_shape(b))
        throw DomainError("field shapes differ");
    auto const& ca = a.cutoff();
    auto const& cb = b.cutoff();
    if (ca.delta != cb.delta || ca.radius != cb.radius || ca.center != cb.center)
        throw DomainError("fields carry different cutoffs");
}
}  // namespace

PotentialField& PotentialField::operator+=(PotentialField const& o)
{
    check_compatible(*this, o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
        coeffs_[i] += o.coeffs_[i];
    structure_ = combined(structure_, o.structure_);
    return *this;
}

PotentialField& PotentialField::operator-=(PotentialField const& o)
{
    check_compatible(*this, o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
        coeffs_[i] -= o.coeffs_[i];
    structure_ = combined(structure_, o.structure_);
    return *this;
}

PotentialField& PotentialField::operator*=(cplx s)
{
    for (auto& c : coeffs_)
        c *= s;
    if (s.imag() != 0.0)
    {
        // i * skew-symmetric is Hermitian, i * real is not real.
        structure_ = Structure::general_complex;
    }
    return *this;
}

//---------------------------------------------------------------------------//

CMat project_matrix(CMat const& a, Structure s)
{
    switch (s)
    {
        case Structure::general_complex: return a;
        case Structure::general_real: return a.real().cast<cplx>();
        case Structure::skew_symmetric:
        {
            RMat r = a.real();
            return (0.5 * (r - r.transpose())).cast<cplx>();
        }
        case Structure::skew_hermitian: return 0.5 * (a - a.adjoint());
    }
    return a;
}

PotentialField project_structure(PotentialField const& f, Structure s)
{
    PotentialField out = f;
    out.set_structure(s);
    if (s == Structure::general_complex)
        return out;
    int const m = f.matrix_size();
    // Pointwise value A(x) = sum_k c_k e_k(x). Re A pairs c_k with conj(c_-k),
    // A* pairs c_k with c_-k^H; modes without a partner cannot contribute.
    for (std::size_t q = 0; q < f.mode_count(); ++q)
    {
        std::size_t p = f.mirror(q);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
            {
                if (p == PotentialField::npos)
                {
                    out.coeff(q, i, j) = 0;
                    continue;
                }
                cplx c = f.coeff(q, i, j);
                switch (s)
                {
                    case Structure::general_real:
                        out.coeff(q, i, j) = 0.5 * (c + std::conj(f.coeff(p, i, j)));
                        break;
                    case Structure::skew_symmetric:
                    {
                        cplx re_ij = 0.5 * (c + std::conj(f.coeff(p, i, j)));
                        cplx re_ji = 0.5 * (f.coeff(q, j, i) + std::conj(f.coeff(p, j, i)));
                        out.coeff(q, i, j) = 0.5 * (re_ij - re_ji);
                        break;
                    }
                    case Structure::skew_hermitian:
                        out.coeff(q, i, j) = 0.5 * (c - std::conj(f.coeff(p, j, i)));
                        break;
                    default: break;
                }
            }
    }
    return out;
}

PotentialField random_field(int d, int m, int modes, double half_width, Structure s, double amplitude,
                            double decay, Rng& rng)
{
    PotentialField f(d, m, modes, half_width, Structure::general_complex);
    std::vector<int> idx(d);
    double const base = kPi / half_width;
    for (std::size_t q = 0; q < f.mode_count(); ++q)
    {
        f.unflatten(q, idx);
        double k2 = 0;
        for (int a = 0; a < d; ++a)
        {
            double k = base * f.frequency(idx[a]);
            k2 += k * k;
        }
        double sd = amplitude * std::pow(1.0 + k2, -0.5 * decay);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                f.coeff(q, i, j) = sd * cplx(rng.normal(), rng.normal());
    }
    return project_structure(f, s);
}

PotentialField extend_with_cutoff(PotentialField const& f, double delta)
{
    if (!(delta > 0))
        throw DomainError("cutoff delta must be positive");
    if (!(1.0 + delta < f.half_width()))
        throw DomainError("1 + delta must stay inside the box");
    if (f.cutoff().active())
        throw DomainError("field already carries a cutoff");
    PotentialField out = f;
    out.set_cutoff(Cutoff{Vec::Zero(f.dim()), 1.0, delta});
    return out;
}

//---------------------------------------------------------------------------//

Attenuation::Attenuation(PotentialField p, std::vector<PotentialField> a) : phi(std::move(p)), one_form(std::move(a))
{
    if (!one_form.empty() && static_cast<int>(one_form.size()) != phi.dim())
        throw DomainError("one-form needs d components");
    for (auto const& c : one_form)
        if (!c.same_shape(phi))
            throw DomainError("attenuation components must share (d, m, L, modes)");
}

bool Attenuation::is_real() const
{
    if (!naxray::is_real(phi.structure()))
        return false;
    return std::all_of(one_form.begin(), one_form.end(),
                       [](PotentialField const& c) { return naxray::is_real(c.structure()); });
}

bool Attenuation::is_skew() const
{
    auto skew = [](Structure s) { return s == Structure::skew_symmetric || s == Structure::skew_hermitian; };
    if (!skew(phi.structure()))
        return false;
    return std::all_of(one_form.begin(), one_form.end(),
                       [&](PotentialField const& c) { return skew(c.structure()); });
}

CMat Attenuation::evaluate(Vec const& x, Vec const& v) const
{
    CMat a = phi.evaluate(x);
    for (std::size_t j = 0; j < one_form.size(); ++j)
        a += v[static_cast<Eigen::Index>(j)] * one_form[j].evaluate(x);
    return a;
}

Attenuation Attenuation::extended(double delta) const
{
    Attenuation out;
    out.phi = extend_with_cutoff(phi, delta);
    for (auto const& c : one_form)
        out.one_form.push_back(extend_with_cutoff(c, delta));
    return out;
}

//---------------------------------------------------------------------------//

BallQuadrature ball_quadrature(int d, int order, Vec const& center, double radius)
{
    BallQuadrature q;
    NodeFn nodes = ball_gauss_nodes(order, center, radius);
    std::vector<double> x(d);
    std::function<void(int, double)> rec = [&](int axis, double w) {
        std::vector<double> nd, wt;
        nodes(axis, x.data(), nd, wt);
        for (std::size_t j = 0; j < nd.size(); ++j)
        {
            x[axis] = nd[j];
            if (axis + 1 < d)
                rec(axis + 1, w * wt[j]);
            else
            {
                q.points.push_back(Eigen::Map<Vec const>(x.data(), d));
                q.weights.push_back(w * wt[j]);
            }
        }
    };
    rec(0, 1.0);
    return q;
}

std::vector<cplx> sample_on_ball(PotentialField const& f, int order, Vec const& center, double radius,
                                 BallQuadrature* quad)
{
    int const mm = f.matrix_size() * f.matrix_size();
    std::vector<cplx> values;
    if (quad)
    {
        quad->points.clear();
        quad->weights.clear();
    }
    nested_pass(
        f, nullptr, ball_gauss_nodes(order, center, radius),
        [&](double const* x, double w, cplx const* v) {
            values.insert(values.end(), v, v + mm);
            if (quad)
            {
                quad->points.push_back(Eigen::Map<Vec const>(x, f.dim()));
                quad->weights.push_back(w);
            }
        },
        true);
    return values;
}

double l2_norm_on_ball(PotentialField const& f, Vec const& center, double radius, int order)
{
    if (center.size() != f.dim())
        throw DomainError("ball center dimension mismatch");
    int const mm = f.matrix_size() * f.matrix_size();
    double sum = 0;
    nested_pass(
        f, nullptr, ball_gauss_nodes(order, center, radius),
        [&](double const*, double w, cplx const* v) {
            double s = 0;
            for (int e = 0; e < mm; ++e)
                s += std::norm(v[e]);
            sum += w * s;
        },
        true);
    return std::sqrt(sum);
}

double l2_distance_on_ball(PotentialField const& f, PotentialField const& g, int order)
{
    if (f.dim() != g.dim() || f.matrix_size() != g.matrix_size())
        throw DomainError("l2 distance needs matching (d, m)");
    if (f.same_shape(g) && f.cutoff().delta == g.cutoff().delta && f.cutoff().radius == g.cutoff().radius &&
        f.cutoff().center == g.cutoff().center)
        return l2_norm_on_ball(f - g, order);
    BallQuadrature quad;
    Vec zero = Vec::Zero(f.dim());
    auto a = sample_on_ball(f, order, zero, 1.0, &quad);
    auto b = sample_on_ball(g, order, zero, 1.0);
    int const mm = f.matrix_size() * f.matrix_size();
    double s = 0;
    for (std::size_t i = 0; i < quad.weights.size(); ++i)
    {
        double n2 = 0;
        for (int e = 0; e < mm; ++e)
            n2 += std::norm(a[i * mm + e] - b[i * mm + e]);
        s += quad.weights[i] * n2;
    }
    return std::sqrt(s);
}

double l2_norm_on_ball(PotentialField const& f, int order)
{
    return l2_norm_on_ball(f, Vec::Zero(f.dim()), 1.0, order);
}

double linf_norm(PotentialField const& f, int grid)
{
    int const mm = f.matrix_size() * f.matrix_size();
    double sup = 0;
    nested_pass(
        f, nullptr, ball_uniform_nodes(grid),
        [&](double const*, double, cplx const* v) { sup = std::max(sup, frob(v, mm)); }, true);
    return sup;
}

double derivative_sup(PotentialField const& f, int order, int grid)
{
    if (order < 0 || order > 6)
        throw DomainError("differentiation order must be in [0, 6]");
    if (order == 0)
        return linf_norm(f, grid);
    int const mm = f.matrix_size() * f.matrix_size();
    std::vector<std::vector<int>> alphas;
    std::vector<int> cur;
    multi_indices(f.dim(), order, cur, alphas);
    double sup = 0;
    for (auto const& alpha : alphas)
        nested_pass(
            f, alpha.data(), ball_uniform_nodes(grid),
            [&](double const*, double, cplx const* v) { sup = std::max(sup, frob(v, mm)); }, false);
    return sup;
}

double ck_seminorm(PotentialField const& f, int k, int grid)
{
    double best = 0;
    for (int j = 0; j <= k; ++j)
        best = std::max(best, derivative_sup(f, j, grid));
    return best;
}

NormReport norm_report(PotentialField const& f, int k, int grid)
{
    NormReport r;
    r.l2 = l2_norm_on_ball(f);
    r.linf = linf_norm(f, grid);
    double best = 0;
    for (int j = 0; j <= k; ++j)
    {
        best = std::max(best, j == 0 ? r.linf : derivative_sup(f, j, grid));
        r.ck.push_back(best);
    }
    return r;
}

double linf_norm(Attenuation const& a, int grid)
{
    int const mm = a.matrix_size() * a.matrix_size();
    std::vector<double> phi_vals;
    nested_pass(
        a.phi, nullptr, ball_uniform_nodes(grid),
        [&](double const*, double, cplx const* v) { phi_vals.push_back(frob(v, mm)); }, true);
    std::vector<double> form_sq(phi_vals.size(), 0.0);
    for (auto const& c : a.one_form)
    {
        std::size_t i = 0;
        nested_pass(
            c, nullptr, ball_uniform_nodes(grid),
            [&](double const*, double, cplx const* v) {
                double s = frob(v, mm);
                form_sq[i++] += s * s;
            },
            true);
    }
    double sup = 0;
    for (std::size_t i = 0; i < phi_vals.size(); ++i)
        sup = std::max(sup, phi_vals[i] + std::sqrt(form_sq[i]));
    return sup;
}
}  // namespace naxray
