#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdjunta/boolfn.hpp"
#include "tdjunta/walk.hpp"

namespace tdj {

/// Monte-Carlo estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

using Predictor = std::function<double(const HypercubePoint&)>;

/// E_x[(predictor(x) - f(x))^2] by enumeration of the 2^k support patterns.
/// Only valid when the predictor depends on support coordinates alone; the
/// off-support coordinates are held at +1.
double uniform_mse_exact(const Predictor& predictor, const BooleanFunction& f);
Estimate uniform_mse_mc(const Predictor& predictor, const BooleanFunction& f, std::size_t n, std::uint64_t seed);

/// Fraction of points where sign(predictor) agrees with f. sign(0) = +1.
/// Throws std::invalid_argument unless f is +-1-valued.
double sign_accuracy(const Predictor& predictor, const BooleanFunction& f, std::span<const HypercubePoint> points);

/// E_x[predictor(x) x^A] over uniform x.
Estimate net_fourier_coeff(const Predictor& predictor, int dim, const Subset& subset, std::size_t n,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Coupon-collector support recovery

struct BaselineConfig {
    std::uint64_t patience = 0;  // 0 selects ceil(10 (d/p) ln d)
    std::uint64_t step_cap = 10'000'000;
};

struct BaselineResult {
    Subset support;                   // coordinates whose flip changed the label
    std::uint64_t discovery_step = 0; // step at which the last coordinate was found
    std::uint64_t steps_used = 0;
    bool capped = false;              // step cap hit before the patience window closed
};

/// Walks until no new coordinate has appeared for `patience` steps.
BaselineResult baseline_support_recovery(const BooleanFunction& f, const WalkConfig& walk,
                                         const BaselineConfig& cfg = {});

// ---------------------------------------------------------------------------
// Cross-predictability

enum class CpMethod { Exact, Mc, RwBatch };

struct CpEstimate {
    double value = 0.0;
    double std_error = 0.0;
    CpMethod method = CpMethod::Exact;
    std::size_t n = 0;
};

std::string to_string(CpMethod m);

double binomial(int n, int k);

/// 1 / C(d, k).
double cp_exact_parity_orbit(int dim, int k);

/// CP of the k-parity orbit by exhaustive enumeration of all parity pairs and
/// all 2^d inputs. d <= 12.
double cp_bruteforce_parity_orbit(int dim, int k);

/// e_k(z) / C(d, k) with z_i = x_i x'_i, by the normalised DP recurrence.
double orbit_kernel_parity(const HypercubePoint& x, const HypercubePoint& y, int k);

/// Mean of F(x) F(x') over all C(d, k) parities. d <= 16.
double orbit_kernel_bruteforce(const HypercubePoint& x, const HypercubePoint& y, int k);

/// E_{x,x'}[K(x,x')^2] over independent uniform x, x'.
CpEstimate cp_mc(int dim, int k, std::size_t n, std::uint64_t seed);

/// E[(1/B^2) sum_{i,j} K(x_i, x_j)^2] over stationary walk batches of length B.
CpEstimate cp_rw_batch(int dim, int k, double flip_prob, std::size_t batch, std::size_t n_outer,
                       std::uint64_t seed);

/// 1/2 + (T sqrt(M) A / (2 tau)) (cp + d/(pB))^(1/4).
double lower_bound_rhs(double steps, double model_size, double grad_range, double tau_noise, double cp,
                       int dim, double flip_prob, double batch);

// ---------------------------------------------------------------------------
// Edge-chain observable phi_v(x, y) = (f(y) - f(x)) sum_j (y_j - x_j) v_j on
// the p-lazy walk over {-1,+1}^k.

/// Support function of f on k coordinates with a direction v in {-2,0,2}^k.
class PhiObservable {
public:
    /// Throws std::invalid_argument unless v = s - r for support patterns with
    /// f(s) != f(r).
    PhiObservable(std::vector<double> table, std::vector<int> v);
    /// v = s - r for the given support patterns.
    static PhiObservable from_patterns(const BooleanFunction& f, std::uint64_t s, std::uint64_t r);
    static PhiObservable from_function(const BooleanFunction& f, std::vector<int> v);

    int support_size() const noexcept { return k_; }
    const std::vector<int>& direction() const noexcept { return v_; }
    const std::vector<double>& table() const noexcept { return table_; }

    double operator()(std::uint32_t from, std::uint32_t to) const;

private:
    std::vector<double> table_;
    std::vector<int> v_;
    int k_ = 0;
};

struct PhiMoments {
    double mean_formula = 0.0;           // (4p/k) sum_j v_j fhat_j
    double mean_enumerated = 0.0;
    double second_formula = 0.0;         // (64p/k) sum_{v_j != 0} Inf_j
    double second_enumerated = 0.0;
    double variance = 0.0;               // one-step Var(phi), exact
    double sigma2_exact = 0.0;           // dynamical variance, spectral
    Estimate mean_mc;
    Estimate second_mc;
    Estimate sigma2_batch;               // batch-means estimate
    std::size_t batch_length = 0;
    std::size_t n_steps = 0;
};

inline constexpr int kMaxPhiEnumeration = 12;

/// Batch length ceil(10 k^2 / p) used by the dynamical-variance estimator.
std::size_t phi_batch_length(int k, double flip_prob);

/// Exact moments by enumeration (k <= 12) and Monte-Carlo moments from
/// `n_steps` edges of a stationary walk.
PhiMoments phi_moments(const PhiObservable& phi, double flip_prob, std::size_t n_steps, std::uint64_t seed);

struct CltConfig {
    std::size_t steps = 10'000;         // T
    std::size_t replicas = 2000;
    std::size_t sigma_steps = 2'000'000;
    double ceiling = 0.05;
    std::size_t scale = 16;             // T multiplier for the rate check
};

struct CltReport {
    double sigma2_batch = 0.0;
    double mean = 0.0;
    double ks_mc = 0.0;          // at T
    double ks_mc_scaled = 0.0;   // at scale * T
    std::optional<double> ks_exact;        // exact lattice law at T
    std::optional<double> ks_exact_scaled;
    bool pass = false;

    /// ks_exact / ks_exact_scaled when available, else the Monte-Carlo ratio.
    double ratio() const;
};

/// Kolmogorov-Smirnov distance of a sample to the standard normal.
double ks_distance_normal(std::vector<double> sample);

/// KS distance between the exact law of sum_{t<=T} phi and N(T m, T sigma^2),
/// where m and sigma^2 are the exact mean and dynamical variance. Requires phi
/// values on a lattice h Z and k <= 4; returns nullopt otherwise.
std::optional<double> clt_exact_ks(const PhiObservable& phi, double flip_prob, std::size_t steps);

/// Standardises replicas of the T-step mean by the exact mean and the
/// batch-means sigma, then reports KS distances at T and scale * T. Passes iff
/// the T distance is below the ceiling and the distance shrinks under scaling.
CltReport clt_check(const PhiObservable& phi, double flip_prob, const CltConfig& cfg, std::uint64_t seed);

}  // namespace tdj
