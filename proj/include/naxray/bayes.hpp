#pragma once

#include <span>
#include <string>
#include <vector>

#include "naxray/fields.hpp"
#include "naxray/geometry.hpp"
#include "naxray/rng.hpp"
#include "naxray/transport.hpp"

namespace naxray
{
/*!
 * Matern-Whittle prior on the torus: each Lie-algebra component is an
 * independent real field with coefficient variance amplitude^2 <pi k / L>^{-2 alpha}.
 */
struct PriorSpec
{
    int d = 3;
    int m = 3;
    double alpha = 4.5;
    int modes = 3;
    double L = 2.0;
    double amplitude = 1.0;
    Structure structure = Structure::skew_symmetric;

    void validate() const;
    //! Lie algebra dimension: m(m-1)/2 for so(m), m^2 for gl_m(R).
    int lie_dim() const;
};

//! Orthonormal basis (Frobenius) of so(m) or gl_m(R).
std::vector<RMat> lie_basis(int m, Structure s);
//! Coordinates <B_k, Re A>_F.
Vec lie_coordinates(CMat const& a, std::vector<RMat> const& basis);

//! n^{-d / (4 alpha + 2 d)}.
double scale_for_n(PriorSpec const& spec, double n);

/*!
 * Whitened parametrisation of the prior: theta ~ N(0, I) maps linearly to
 * the field. Parameters are ordered component-major; within a component
 * they run over the DC mode and one representative of every +/- frequency
 * pair (real part, imaginary part).
 */
class PriorModel
{
  public:
    explicit PriorModel(PriorSpec spec);

    PriorSpec const& spec() const { return spec_; }
    int lie_dim() const { return static_cast<int>(basis_.size()); }
    //! Real parameters per Lie-algebra component.
    int per_component() const { return static_cast<int>(cols_.size()); }
    std::size_t dim() const { return static_cast<std::size_t>(lie_dim()) * cols_.size(); }
    std::vector<RMat> const& basis() const { return basis_; }

    //! Field for whitened parameters theta, multiplied by scale.
    PotentialField to_field(std::span<double const> theta, double scale = 1.0) const;
    Vec draw(Rng& rng) const;
    //! Real basis functions at x: out[r] for r < per_component().
    void basis_functions(double const* x, double* out) const;
    //! Sum of coefficient variances, the pointwise variance of each component.
    double pointwise_variance() const;

  private:
    enum class Kind
    {
        dc,
        cosine,
        sine
    };
    struct Column
    {
        Kind kind;
        std::size_t mode;
        std::size_t mirror;
        std::vector<double> freq;  // pi k / L
        double sigma;
    };
    PriorSpec spec_;
    std::vector<RMat> basis_;
    std::vector<Column> cols_;
};

PotentialField sample_prior(PriorSpec const& spec, Rng& rng);

struct DataRecord
{
    BoundaryDirection bd;
    Vec y;
};

struct Dataset
{
    std::vector<DataRecord> records;
    int m = 3;
    Structure structure = Structure::skew_symmetric;
    double noise_sigma = 1.0;
    std::string truth_id;

    std::size_t n() const { return records.size(); }
};

Dataset simulate_dataset(PotentialField const& phi0, std::size_t n, Rng& rng, SolverConfig const& cfg = {},
                         std::string truth_id = "");

//! sum_i -|P C_Phi(x_i, v_i) - y_i|^2 / 2 - (dim g / 2) log(2 pi).
double log_likelihood(PotentialField const& phi, Dataset const& ds, SolverConfig const& cfg = {});

/*!
 * Likelihood engine for the whitened parametrisation: caches the real basis
 * functions on every chord of the dataset so one evaluation is a small
 * matrix product plus a real RK4 sweep per record.
 */
class LikelihoodCache
{
  public:
    LikelihoodCache(PriorModel const& model, Dataset const& ds, SolverConfig const& cfg);
    //! Log-likelihood of the field to_field(theta, scale).
    double operator()(std::span<double const> theta, double scale) const;

  private:
    PriorModel const& model_;
    Dataset const& ds_;
    struct Chord
    {
        int n_steps = 0;
        double h = 0;
        Eigen::Index offset = 0;  // first row in basis_
    };
    std::vector<Chord> chords_;
    RMat basis_;  // stacked (2 n_steps + 1) x columns blocks, one per chord
};

struct ChainConfig
{
    double beta = 0.1;
    int n_iter = 2000;
    int burn_in = 500;
    int thin = 10;
    std::uint64_t seed = 0;
    //! Tune beta during burn-in toward target_accept (Robbins-Monro on log beta).
    bool adapt = false;
    double target_accept = 0.25;
    //! Start at theta = 0 instead of a prior draw.
    bool start_at_zero = false;

    void validate() const;
};

struct ChainResult
{
    std::vector<std::vector<double>> samples;  //!< whitened thinned samples
    std::vector<double> loglik_trace;          //!< post-burn-in, every iteration
    double acceptance_rate = 0;                //!< post-burn-in
    double beta = 0;                           //!< step used after burn-in
    double scale = 1;
};

ChainResult pcn_chain(ChainConfig const& cfg, PriorModel const& model, double scale, Dataset const& ds,
                      SolverConfig const& solver = {});

struct PosteriorSummary
{
    PotentialField mean_field;
    double l2_error_vs_truth = 0;
    double acceptance_rate = 0;
    double ess_proxy = 0;
};

PotentialField posterior_mean(std::span<PotentialField const> samples);
PosteriorSummary summarize(ChainResult const& chain, PriorModel const& model, PotentialField const* truth);

//! Effective sample size of a scalar trace from the initial positive autocorrelation sequence.
double effective_sample_size(std::span<double const> trace);

//! sqrt(1 - mean exp(-|C_Phi - C_Psi|_F^2 / 8)) over n_mc uniform directions.
double hellinger(Attenuation const& phi, Attenuation const& psi, std::size_t n_mc, Rng& rng,
                 SolverConfig const& cfg = {});

struct SweepRow
{
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double alpha = 0;
    double beta = 0;
    double accept_rate = 0;
    double l2_error = 0;
};

/*!
 * For each (n, seed): simulate with streams derived from (seed, n), run pCN
 * under the n-scaled prior and record the posterior-mean L^2 error.
 */
std::vector<SweepRow> consistency_sweep(PotentialField const& phi0, std::span<std::size_t const> n_grid,
                                        std::span<std::uint64_t const> seeds, PriorSpec const& spec,
                                        ChainConfig const& chain, SolverConfig const& solver = {});

//! Seed for the data of sweep cell (seed, n) on the given stream.
std::uint64_t sweep_seed(std::uint64_t seed, std::size_t n, std::uint64_t stream_id);
}  // namespace naxray
