#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdjunta/analysis.hpp"
#include "tdjunta/boolfn.hpp"
#include "tdjunta/deepnet.hpp"
#include "tdjunta/run_record.hpp"
#include "tdjunta/shallow.hpp"

namespace tdj {

/// Raised for malformed configuration; the CLI maps it to exit status 2.
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Function specification files

/// Parses {dim, parity_support | junta{support,table} | fourier[{subset,coeff}]}.
BooleanFunction parse_function_spec(const std::string& json_text);
BooleanFunction load_function_spec(const std::filesystem::path& path);
/// Writes the fourier form (junta form when a support was declared).
std::string function_spec_json(const BooleanFunction& f);

// ---------------------------------------------------------------------------
// Experiment specification

inline constexpr int kSpecVersion = 1;

enum class Learner { Mlp, Algorithm1 };

/// One learner variant run over every seed.
struct ArmSpec {
    std::string name;
    DataKind data = DataKind::Walk;
    LossKind loss = LossKind::Td;
    double alpha = 0.9;
    double flip_prob = 0.9;

    friend bool operator==(const ArmSpec&, const ArmSpec&) = default;
};

struct MlpSpec {
    std::vector<int> hidden = {64, 64, 32};
    double lr = 0.005;
    std::uint64_t max_iters = 1'000'000;
    std::optional<double> stop_loss = 0.01;  // nullopt: never stop early
    std::size_t test_size = 8192;
    std::vector<std::pair<std::string, Subset>> tracked;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Algorithm1Spec {
    int n_hidden = 400;
    std::size_t batch_size = 0;            // 0: ceil(512 d / epsilon^2)
    double epsilon = 1.0;                  // margin and bias slack
    double kappa = 0.001;
    int phase1_steps = 1;
    std::uint64_t phase2_steps = 1'000'000;
    std::optional<double> theorem_delta = 0.05;
    std::optional<double> phase2_lr;
    double ridge = 0.0;

    friend bool operator==(const Algorithm1Spec&, const Algorithm1Spec&) = default;
};

struct ExperimentSpec {
    int version = kSpecVersion;
    /// Path to a function spec (relative to the spec file) or inline JSON.
    std::string target;
    bool target_inline = false;
    Learner learner = Learner::Mlp;
    MlpSpec mlp;
    Algorithm1Spec algorithm1;
    std::vector<ArmSpec> arms;
    std::uint64_t log_every = 0;   // 0: max(1, total / 500)
    std::uint64_t eval_every = 0;  // 0: every log event
    /// Checkpoint after this many log events; 0 disables checkpoints.
    std::uint64_t checkpoint_every = 10;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "out";

    /// Throws SpecError on an invalid combination.
    void validate() const;

    friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Strict parser: unknown keys, a wrong version or empty seeds throw SpecError.
ExperimentSpec parse_experiment_spec(const std::string& json_text);
std::string experiment_spec_json(const ExperimentSpec& spec);

/// Resolves the target relative to `base_dir`; throws SpecError if missing.
BooleanFunction resolve_target(const ExperimentSpec& spec, const std::filesystem::path& base_dir);

TrainConfig mlp_train_config(const ExperimentSpec& spec, const ArmSpec& arm, std::uint64_t seed);
Algorithm1Config algorithm1_config(const ExperimentSpec& spec, const ArmSpec& arm, const BooleanFunction& f,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Execution

struct RunOptions {
    std::size_t workers = 1;
    bool fresh = false;            // ignore existing checkpoints
    bool gnuplot_script = false;
    /// Testing hook: suspend every MLP run after this many log events,
    /// leaving its checkpoint behind.
    std::optional<std::uint64_t> suspend_after;
    std::function<void(const std::string&)> progress;
};

struct RunSummary {
    std::vector<std::filesystem::path> run_csvs;
    std::vector<std::filesystem::path> aggregate_csvs;
    std::size_t suspended = 0;
};

/// Runs every (arm, seed) pair, writing `<out>/<arm>/seed_<s>.csv` and
/// `<out>/<arm>_aggregate.csv`. Existing checkpoints are resumed.
RunSummary run_experiment(const ExperimentSpec& spec, const BooleanFunction& f, const RunOptions& opts);

/// Per-sample-count mean and standard deviation (n-1) across seeds. Rows are
/// the union of sample counts; a seed that stopped early carries its last row
/// forward. Columns: samples, n, <col>_mean, <col>_std...
RunRecord aggregate_records(const std::vector<RunRecord>& records);

/// TDJ_WORKERS if set, else the hardware concurrency.
std::size_t default_workers();

/// Runs jobs [0, n) on a bounded pool; rethrows the first failure after joining.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

// ---------------------------------------------------------------------------
// Analysis reports

/// A CSV table plus a JSON summary {estimate, std_error, n, seed, config, ...}.
struct AnalysisReport {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::string summary_json;

    std::string csv() const;
    /// Writes <dir>/<kind>.csv and <dir>/<kind>.json.
    void write(const std::filesystem::path& dir) const;
};

struct CpParams {
    int dim = 8;
    int k = 2;
    double flip_prob = 0.5;
    std::vector<std::size_t> batches = {4, 16, 64, 256};
    std::size_t n_outer = 2000;
    std::size_t mc_samples = 100'000;
    std::uint64_t seed = 0;
};
AnalysisReport analyze_cp(const CpParams& p);

struct BoundParams {
    double steps = 1.0;
    double model_size = 50.0;
    double grad_range = 1.0;
    double tau_noise = 1.0;
    std::optional<double> cp;  // unset: 1 / C(d, k)
    int dim = 50;
    int k = 5;
    double flip_prob = 0.9;
    double batch = 125'000.0;
};
AnalysisReport analyze_bound(const BoundParams& p);

struct CltParams {
    std::uint64_t s = 0;  // support patterns defining v = s - r
    std::uint64_t r = 1;
    double flip_prob = 0.5;
    CltConfig config;
    std::uint64_t seed = 0;
};
AnalysisReport analyze_clt(const BooleanFunction& f, const CltParams& p);

struct BaselineParams {
    double flip_prob = 0.9;
    std::size_t runs = 100;
    std::uint64_t seed = 0;  // run i walks with seed + i
    BaselineConfig config;
};
AnalysisReport analyze_baseline(const BooleanFunction& f, const BaselineParams& p);

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names();
std::string preset_description(const std::string& name);
/// Throws SpecError for an unknown name.
ExperimentSpec make_preset(const std::string& name);

}  // namespace tdj
