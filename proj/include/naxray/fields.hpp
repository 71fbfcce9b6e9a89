#pragma once

#include <span>
#include <string>
#include <vector>

#include "naxray/rng.hpp"
#include "naxray/types.hpp"

namespace naxray
{
enum class Structure
{
    general_complex,
    general_real,
    skew_symmetric,
    skew_hermitian
};

std::string to_string(Structure s);
Structure structure_from_string(std::string const& s);
//! Real-valued structures evaluate to real matrices.
bool is_real(Structure s);

/*!
 * Smooth radial window: 1 for |x - center| <= radius, 0 for
 * |x - center| >= radius + delta, with the exp(-1/t) smooth-step transition.
 * delta = 0 disables the window.
 */
struct Cutoff
{
    Vec center;
    double radius = 1.0;
    double delta = 0.0;

    bool active() const { return delta > 0; }
    double operator()(Vec const& x) const;
    double operator()(double const* x) const;
    //! Windowing profile as a function of the distance from the center.
    double profile(double dist) const;
};

//! Smooth step S(s) = psi(1-s) / (psi(1-s) + psi(s)), psi(t) = exp(-1/t).
double smooth_step(double s);

/*!
 * Band-limited matrix field on the torus [-L, L)^d.
 *
 * Phi(x) = window(x) * sum_k c_k exp(i pi k.x / L), with integer frequencies
 * k_a in [-(n-1)/2, n/2] per axis for n modes. Coefficients are stored
 * mode-major (axis 0 slowest), then row-major m x m. Real structures keep
 * Hermitian-symmetric coefficients; frequencies without a mirror partner are
 * held at zero.
 */
class PotentialField
{
  public:
    PotentialField() = default;
    PotentialField(int d, int m, int modes, double half_width, Structure structure);

    //! Constant matrix value (DC mode only).
    static PotentialField constant(int d, int modes, double half_width, CMat const& value,
                                   Structure structure);

    int dim() const { return d_; }
    int matrix_size() const { return m_; }
    int modes() const { return n_; }
    double half_width() const { return L_; }
    Structure structure() const { return structure_; }
    Cutoff const& cutoff() const { return cutoff_; }
    void set_cutoff(Cutoff c);
    //! Relabel without touching coefficients (use project_structure to enforce).
    void set_structure(Structure s) { structure_ = s; }

    std::size_t mode_count() const { return n_modes_; }
    int frequency(int index) const { return index - offset_; }
    int index_of(int frequency) const { return frequency + offset_; }
    //! Flat mode index of a per-axis index tuple.
    std::size_t flat_index(std::span<int const> idx) const;
    void unflatten(std::size_t flat, std::span<int> idx) const;
    //! Flat index of the mirror frequency -k, or npos when out of range.
    std::size_t mirror(std::size_t flat) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::span<cplx const> coeffs() const { return coeffs_; }
    std::span<cplx> coeffs() { return coeffs_; }
    cplx& coeff(std::size_t mode, int i, int j) { return coeffs_[(mode * m_ + i) * m_ + j]; }
    cplx coeff(std::size_t mode, int i, int j) const { return coeffs_[(mode * m_ + i) * m_ + j]; }

    CMat evaluate(Vec const& x) const;
    //! Writes m*m row-major values at point x (length d).
    void evaluate_into(double const* x, cplx* out) const;
    //! Values at origin + (t0 + j dt) dir for j < count; out has count*m*m entries.
    void evaluate_along(Vec const& origin, Vec const& dir, double t0, double dt, int count,
                        cplx* out) const;

    //! Mixed partial derivative of the Fourier part (window ignored) at x.
    CMat derivative(Vec const& x, std::span<int const> order) const;

    bool same_shape(PotentialField const& o) const;
    PotentialField& operator+=(PotentialField const& o);
    PotentialField& operator-=(PotentialField const& o);
    PotentialField& operator*=(cplx s);

    friend PotentialField operator+(PotentialField a, PotentialField const& b) { return a += b; }
    friend PotentialField operator-(PotentialField a, PotentialField const& b) { return a -= b; }
    friend PotentialField operator*(cplx s, PotentialField a) { return a *= s; }
    friend PotentialField operator*(double s, PotentialField a) { return a *= cplx(s, 0); }

  private:
    int d_ = 0;
    int m_ = 0;
    int n_ = 0;
    int offset_ = 0;
    double L_ = 2.0;
    Structure structure_ = Structure::general_complex;
    std::size_t n_modes_ = 0;
    std::vector<cplx> coeffs_;
    Cutoff cutoff_;

    void contract(double const* x, int const* orders, cplx* out, std::vector<cplx>& scratch) const;
};

//! Frobenius-nearest matrix with the given structure.
CMat project_matrix(CMat const& a, Structure s);

//! Coefficientwise projection onto the structure (pointwise Frobenius-nearest).
PotentialField project_structure(PotentialField const& f, Structure s);

/*!
 * Random field with Gaussian coefficients of standard deviation
 * amplitude <pi k / L>^{-decay}, projected onto the structure.
 */
PotentialField random_field(int d, int m, int modes, double half_width, Structure s, double amplitude,
                            double decay, Rng& rng);

//! Field equal to f on the unit ball and zero for |x| >= 1 + delta.
PotentialField extend_with_cutoff(PotentialField const& f, double delta);

/*!
 * Direction-dependent attenuation A(x, v) = Phi(x) + sum_j A_j(x) v_j.
 */
struct Attenuation
{
    PotentialField phi;
    std::vector<PotentialField> one_form;

    Attenuation() = default;
    Attenuation(PotentialField p) : phi(std::move(p)) {}
    Attenuation(PotentialField p, std::vector<PotentialField> a);

    int dim() const { return phi.dim(); }
    int matrix_size() const { return phi.matrix_size(); }
    bool is_real() const;
    //! True when every value lies in u(m) (skew-symmetric or skew-hermitian parts).
    bool is_skew() const;
    CMat evaluate(Vec const& x, Vec const& v) const;
    Attenuation extended(double delta) const;
};

//---------------------------------------------------------------------------//
// Norms
//---------------------------------------------------------------------------//

struct NormReport
{
    double l2 = 0;
    double linf = 0;
    std::vector<double> ck;  //!< cumulative C^0 ... C^k estimates
};

//! Quadrature nodes on the ball B(center, radius), nested Gauss-Legendre per axis.
struct BallQuadrature
{
    std::vector<Vec> points;
    std::vector<double> weights;
};
BallQuadrature ball_quadrature(int d, int order, Vec const& center, double radius);

//! Sampled values of the field on a nested Gauss grid (row-major m*m per node).
std::vector<cplx> sample_on_ball(PotentialField const& f, int order, Vec const& center, double radius,
                                 BallQuadrature* quad = nullptr);

double l2_norm_on_ball(PotentialField const& f, int order = 64);
double l2_norm_on_ball(PotentialField const& f, Vec const& center, double radius, int order = 64);
//! |f - g|_{L^2(ball)} for fields of any (matching d, m) shape.
double l2_distance_on_ball(PotentialField const& f, PotentialField const& g, int order = 64);
//! Sup of the pointwise Frobenius norm over a uniform grid of the ball.
double linf_norm(PotentialField const& f, int grid = 33);
//! Sup over the grid of all mixed partials of exact order k (Fourier part).
double derivative_sup(PotentialField const& f, int order, int grid = 33);
//! Cumulative max over orders 0..k.
double ck_seminorm(PotentialField const& f, int k, int grid = 33);
NormReport norm_report(PotentialField const& f, int k, int grid = 33);

//! Upper bound for sup_{x,v} |A(x,v)|_F from grid values: |Phi| + sqrt(sum |A_j|^2).
double linf_norm(Attenuation const& a, int grid = 33);
}  // namespace naxray
