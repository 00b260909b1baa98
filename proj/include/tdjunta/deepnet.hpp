#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdjunta/boolfn.hpp"
#include "tdjunta/loss.hpp"
#include "tdjunta/run_record.hpp"
#include "tdjunta/walk.hpp"

namespace tdj {

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out

    friend bool operator==(const DenseLayer& l, const DenseLayer& r) {
        return l.weight.rows() == r.weight.rows() && l.weight.cols() == r.weight.cols() &&
               l.weight == r.weight && l.bias == r.bias;
    }
};

/// Fully connected ReLU network with a linear scalar output.
struct MlpNet {
    std::vector<int> layer_dims;  // input d, hidden sizes..., 1
    std::vector<DenseLayer> layers;

    int input_dim() const { return layer_dims.front(); }
    std::size_t parameter_count() const;

    friend bool operator==(const MlpNet&, const MlpNet&) = default;
};

/// Every weight and bias i.i.d. Unif[-1/sqrt(fan_in), 1/sqrt(fan_in)].
MlpNet mlp_init(std::vector<int> layer_dims, std::uint64_t seed);

double mlp_forward(const MlpNet& net, const HypercubePoint& x);
double mlp_forward(const MlpNet& net, const Eigen::VectorXd& x);
/// Column-wise forward pass over a d x n batch; returns n outputs.
Eigen::VectorXd mlp_forward_batch(const MlpNet& net, const Eigen::MatrixXd& inputs);

/// Parameter-shaped gradient.
struct MlpGradient {
    std::vector<DenseLayer> layers;
};

/// Activations of one forward pass, kept for backprop.
class MlpWorkspace {
public:
    explicit MlpWorkspace(const MlpNet& net);

    double forward(const MlpNet& net, const Eigen::VectorXd& x);
    /// Back-propagates d loss / d output through the cached pass, storing the
    /// per-layer deltas (ReLU'(0) = 1). Weights are read, not written.
    void backward(const MlpNet& net, double output_grad);
    /// grad += deltas (x) inputs of the cached pass.
    void accumulate(MlpGradient& grad) const;
    /// net -= lr * deltas (x) inputs; call after every backward() that reads
    /// the pre-update weights.
    void apply(MlpNet& net, double lr) const;

    double output() const noexcept { return output_; }

private:
    std::vector<Eigen::VectorXd> inputs_;  // input of each layer
    std::vector<Eigen::VectorXd> pre_;     // pre-activation of each layer
    std::vector<Eigen::VectorXd> delta_;   // d loss / d pre-activation
    double output_ = 0.0;
};

MlpGradient zero_gradient(const MlpNet& net);

/// Exact gradient of the per-pair TD loss over all parameters; two forward
/// passes chained through td_loss_output_grads.
MlpGradient mlp_backward_td(const MlpNet& net, const PairSample& pair, const TdParams& params);
/// Gradient of 0.5 (NN(x) - y)^2.
MlpGradient mlp_backward_square(const MlpNet& net, const HypercubePoint& x, double y);

enum class LossKind { Td, Square };
enum class DataKind { Walk, Iid };

struct TrainConfig {
    LossKind loss = LossKind::Td;
    double alpha = 0.9;
    DataKind data = DataKind::Walk;
    double flip_prob = 0.9;
    std::vector<int> hidden = {64, 64, 32};
    double lr = 0.005;
    std::uint64_t max_iters = 1'000'000;
    /// Stop once the windowed train loss drops below this; +inf disables.
    double stop_loss = 0.01;
    std::uint64_t seed = 0;
    /// Logging cadence in samples; 0 selects default_log_interval(max_iters).
    std::uint64_t log_every = 0;
    /// Test-set evaluation happens on log events that are multiples of this
    /// (0: every log event). Rows without an evaluation repeat the last one.
    std::uint64_t eval_every = 0;
    std::size_t test_size = 8192;
    /// Fourier coefficients E[NN(x) x^A] tracked on the test set; tag -> A.
    std::vector<std::pair<std::string, Subset>> tracked;

    void validate() const;
};

struct TrainResult {
    MlpNet net;
    RunRecord record;  // samples, train_loss, test_mse, test_acc, coeff_<tag>...
    std::uint64_t samples = 0;
    bool stopped_early = false;
};

/// Mutable training state; everything needed to resume a run bit-exactly.
struct TrainState {
    MlpNet net;
    std::uint64_t iteration = 0;
    HypercubePoint current;   // last data point (walk position or last i.i.d. draw)
    std::uint64_t walk_steps = 0;
    CounterRng coord_rng;     // walk coordinate stream
    CounterRng flip_rng;      // walk flip stream
    CounterRng iid_rng;       // i.i.d. stream
    double window_loss = 0.0;
    std::uint64_t window = 0;
    std::vector<double> last_eval;  // test_mse, test_acc, coeffs
    RunRecord record;
    bool finished = false;
    bool stopped_early = false;
};

/// Hooks for checkpointing; `on_log` runs after each appended row and may
/// return false to suspend the run.
struct TrainHooks {
    std::function<bool(const TrainState&)> on_log;
};

TrainState train_init(const BooleanFunction& f, const TrainConfig& cfg);
/// Runs until finished, stopped, or suspended by a hook.
void train_continue(const BooleanFunction& f, const TrainConfig& cfg, TrainState& state,
                    const TrainHooks& hooks = {});
TrainResult train_mlp(const BooleanFunction& f, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Uniform test points drawn from the TestSet stream of `seed`, one per column.
Eigen::MatrixXd make_test_inputs(int dim, std::size_t n, std::uint64_t seed);

/// Named presets: "desk" = 64-64-32, "paper" = 512-512-64, "paper-main" = 512-1024-64.
std::vector<int> mlp_preset(const std::string& name);

std::string save_train_state(const TrainState& state);
TrainState load_train_state(const std::string& json_text);

}  // namespace tdj
