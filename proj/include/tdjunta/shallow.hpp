#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "tdjunta/boolfn.hpp"
#include "tdjunta/loss.hpp"
#include "tdjunta/run_record.hpp"
#include "tdjunta/walk.hpp"

namespace tdj {

/// NN(x) = sum_i a_i ReLU(w_i . x + b_i).
struct TwoLayerNet {
    Eigen::MatrixXd w;  // N x d
    Eigen::VectorXd a;  // N
    Eigen::VectorXd b;  // N

    int n_hidden() const noexcept { return static_cast<int>(w.rows()); }
    int dim() const noexcept { return static_cast<int>(w.cols()); }

    friend bool operator==(const TwoLayerNet& l, const TwoLayerNet& r) {
        return l.w.rows() == r.w.rows() && l.w.cols() == r.w.cols() && l.a.size() == r.a.size() &&
               l.b.size() == r.b.size() && l.w == r.w && l.a == r.a && l.b == r.b;
    }
};

/// w = 0, a = kappa, b = 1/N.
TwoLayerNet init_algorithm1(int n_hidden, int dim, double kappa);

double forward(const TwoLayerNet& net, const HypercubePoint& x);

/// Hidden activations ReLU(w_i . x + b_i).
Eigen::VectorXd hidden_features(const TwoLayerNet& net, const HypercubePoint& x);

struct Phase1Config {
    std::size_t batch_size = 1;  // B
    double lr = 1.0;             // gamma_1
    double init_scale = 1.0;     // kappa
    int steps = 1;               // T_1

    void validate() const;
};

/// gamma_1 = sqrt(2 B d) / (kappa sqrt(k)).
double theorem_phase1_lr(std::size_t batch_size, int dim, double kappa, int support_size);

struct Phase2Config {
    std::optional<double> lr;          // gamma_2; unset selects 1/M_lambda
    double ridge = 0.0;                // lambda
    std::size_t steps = 1;             // T_2
    std::optional<double> bias_range;  // A; unset selects ||w||_1 + epsilon

    void validate() const;
};

/// First-layer increment of the first Phase-I step at the Algorithm-1 init,
/// computed in closed form: (kappa gamma_1 / B) sum_t (x_t - x_{t-1}) df_t.
/// The same d-vector is added to every hidden row. Pairs must form one
/// trajectory (each `next` equals the following `prev`).
Eigen::VectorXd phase1_closed_form_update(const BooleanFunction& f, std::span<const PairSample> pairs,
                                          const Phase1Config& cfg);

/// First-layer increment -gamma_1 * grad_w of the batch-mean TD loss, by
/// reverse-mode differentiation through `net` (ReLU'(0) = 1). Returns N x d.
Eigen::MatrixXd phase1_autograd_update(const TwoLayerNet& net, std::span<const PairSample> pairs,
                                       const Phase1Config& cfg, const TdParams& loss = TdParams{1.0});

/// Phase-I first-layer step computed in closed form.
using ClosedFormUpdate = Eigen::VectorXd (*)(const BooleanFunction&, std::span<const PairSample>,
                                             const Phase1Config&);

struct NondegeneracyReport {
    double min_margin = 0.0;
    /// Closest value-distinguishing pair of support patterns (s, r).
    std::optional<std::pair<std::uint64_t, std::uint64_t>> violating_pair;
    double epsilon = 0.0;

    bool passed() const noexcept { return !violating_pair.has_value(); }
};

inline constexpr int kMaxEnumeratedSupport = 12;

/// Minimum of |<w_S, s - r>| over support patterns with f(s) != f(r). Pairs
/// with equal values are excluded. `violating_pair` is set iff min <= epsilon.
/// A constant f has no such pair and reports +infinity.
NondegeneracyReport check_nondegeneracy(const Eigen::VectorXd& w_row, const BooleanFunction& f, double epsilon);

/// Biases i.i.d. Unif[-A, A]; w and a are untouched.
TwoLayerNet redraw_biases(TwoLayerNet net, double bias_range, std::uint64_t seed);

struct CertificateResult {
    Eigen::VectorXd a_star;
    double residual = 0.0;  // max |Phi a* - f| over support patterns
};

/// Minimal-norm least-squares output weights reproducing f on all 2^k support
/// patterns from the frozen features. Requires w to vanish off the support.
CertificateResult certificate_solve(const TwoLayerNet& net, const BooleanFunction& f);

/// One ridge-regularised square-loss step on the output weights:
/// a <- a - gamma_2 ((a . Phi(x) - y) Phi(x) + lambda a).
void phase2_sgd_step(TwoLayerNet& net, const HypercubePoint& x, double y, double lr, double ridge);

/// Phase-II constants from the convergence analysis, computed with knowledge
/// of f (a simulation oracle; the learner itself never reads f).
struct Phase2Theory {
    double ridge = 0.0;          // lambda = delta / (3 ||a*||^2)
    double lr = 0.0;             // min{1/M, log-branch}; the log branch is dropped when its argument is <= 1
    double m_lambda = 0.0;       // max_s ||Phi(s)||^2 + lambda
    double tau_mix = 0.0;        // (d / 2p) log(2^{2k+1})
    double sigma2_star = 0.0;    // max_s ||grad l_lambda(s; a_lambda*)||^2
    double a_star_norm2 = 0.0;   // ||a*||^2 of the minimal-norm certificate
    bool log_branch = false;     // true when the log branch set lr
};

/// lambda and gamma_2 for a target risk delta after T_2 steps, evaluated at the
/// frozen features of `net`, whose output weights are the Phase-II start.
Phase2Theory theorem_phase2(const TwoLayerNet& net, const BooleanFunction& f, double delta, std::uint64_t steps,
                            double flip_prob);

/// Mixing-time bound (d / 2p) log(2^{2k+1}) of the projected chain.
double projected_mixing_time(int dim, int support_size, double flip_prob);

struct Algorithm1Config {
    WalkConfig walk;
    Phase1Config phase1;
    Phase2Config phase2;
    int n_hidden = 1;
    /// When set, Phase II takes lambda and gamma_2 from theorem_phase2 with
    /// this delta, overriding phase2.lr and phase2.ridge.
    std::optional<double> theorem_delta;
    /// Non-degeneracy threshold; unset selects 0.4 * kappa gamma_1 / B.
    std::optional<double> margin_epsilon;
    /// Logging cadence in Phase-II steps; 0 selects default_log_interval(T_2).
    std::uint64_t log_every = 0;
};

struct Algorithm1Result {
    TwoLayerNet net;
    RunRecord record;        // samples, train_loss, test_mse
    Eigen::VectorXd phase1_row;
    double bias_range = 0.0;
    double phase2_lr = 0.0;
    double phase2_ridge = 0.0;
    double margin_epsilon = 0.0;
    std::optional<Phase2Theory> theory;
};

/// Layerwise SGD: T_1 Phase-I batch steps with the alpha = 1 TD loss, bias
/// redraw, then T_2 single-sample ridge steps continuing the same walk. The
/// uniform test MSE is computed exactly over support patterns.
Algorithm1Result run_algorithm1(const BooleanFunction& f, const Algorithm1Config& cfg, std::uint64_t seed);

/// Uniform-distribution MSE of `net` computed exactly over the support of f.
/// Requires w to vanish off the support.
double exact_uniform_mse(const TwoLayerNet& net, const BooleanFunction& f);

/// Self-describing JSON checkpoint with hexfloat numbers.
std::string save_checkpoint(const TwoLayerNet& net, const std::string& phase, std::uint64_t step,
                            std::uint64_t seed);
struct TwoLayerCheckpoint {
    TwoLayerNet net;
    std::string phase;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
};
TwoLayerCheckpoint load_checkpoint(const std::string& json_text);

}  // namespace tdj
