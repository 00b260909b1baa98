#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdjunta/boolfn.hpp"
#include "tdjunta/rng.hpp"

namespace tdj {

struct WalkConfig {
    int dim = 1;
    double flip_prob = 0.5;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless d >= 1 and 0 < p < 1.
    void validate() const;

    friend bool operator==(const WalkConfig&, const WalkConfig&) = default;
};

/// One proposed move of the lazy walk: coordinate j_t (1-based) and Z_t.
struct WalkMove {
    int coord = 0;
    bool flipped = false;

    friend bool operator==(const WalkMove&, const WalkMove&) = default;
};

/// p-lazy random walk on {-1,+1}^d.
///
/// Each step draws j uniformly from [d] and Z ~ Ber(p) from separate
/// sub-streams and flips coordinate j iff Z = 1. The initial point is uniform.
/// Copies are independent and continue the same sequence.
class LazyWalk {
public:
    explicit LazyWalk(const WalkConfig& cfg);

    /// Restores a walk from its serialised state.
    LazyWalk(const WalkConfig& cfg, HypercubePoint current, std::uint64_t step_count,
             CounterRng coord_rng, CounterRng flip_rng);

    const WalkMove& step();

    const HypercubePoint& current() const noexcept { return current_; }
    std::uint64_t step_count() const noexcept { return steps_; }
    const std::optional<WalkMove>& last_move() const noexcept { return last_; }
    const WalkConfig& config() const noexcept { return cfg_; }
    const CounterRng& coord_rng() const noexcept { return coord_rng_; }
    const CounterRng& flip_rng() const noexcept { return flip_rng_; }

    friend bool operator==(const LazyWalk&, const LazyWalk&) = default;

private:
    WalkConfig cfg_;
    HypercubePoint current_;
    std::uint64_t steps_ = 0;
    CounterRng coord_rng_;
    CounterRng flip_rng_;
    std::optional<WalkMove> last_;
};

inline LazyWalk init_walk(const WalkConfig& cfg) { return LazyWalk(cfg); }

/// Consecutive pair (x^{(t-1)}, x^{(t)}) with exact labels.
struct PairSample {
    HypercubePoint prev;
    HypercubePoint next;
    double y_prev = 0.0;
    double y_next = 0.0;
    WalkMove move;
};

/// Advances the walk one step and returns the overlapping pair it produced.
PairSample next_pair(LazyWalk& walk, const BooleanFunction& f);

/// n overlapping pairs: the `next` of pair i is the `prev` of pair i+1.
std::vector<PairSample> pair_stream(LazyWalk& walk, const BooleanFunction& f, std::size_t n);

/// I.i.d. uniform points on {-1,+1}^d.
class IidSampler {
public:
    IidSampler(int dim, std::uint64_t seed);
    IidSampler(int dim, CounterRng rng) : dim_(dim), rng_(rng) {}
    HypercubePoint next();
    const CounterRng& rng() const noexcept { return rng_; }
    int dim() const noexcept { return dim_; }

private:
    int dim_;
    CounterRng rng_;
};

std::vector<std::pair<HypercubePoint, double>> iid_stream(int dim, std::uint64_t seed,
                                                          const BooleanFunction& f, std::size_t n);

/// Uniform random point drawn from `rng`.
HypercubePoint uniform_point(int dim, CounterRng& rng);

/// Spectral gap 2p/d of the p-lazy walk on {-1,+1}^d.
double spectral_gap(int dim, double flip_prob);

inline constexpr int kMaxDenseKernel = 12;

/// Transition matrix of the walk projected onto k of its d coordinates.
/// States are indexed by support pattern (bit set = +1). Flipping a given
/// projected coordinate has probability p/d; staying has 1 - kp/d. With k = d
/// this is the full chain.
Eigen::MatrixXd projected_chain_kernel(int support_size, int dim, double flip_prob);

/// Stationary p-lazy walk on {-1,+1}^k observed as its edge chain (u, v).
/// A lazy step yields the self-loop (v, v).
class EdgeWalk {
public:
    using Edge = std::pair<std::uint32_t, std::uint32_t>;  // (u, v) as patterns

    EdgeWalk(int support_size, double flip_prob, std::uint64_t seed);

    /// Next edge; the first call returns (x_0, x_1) with x_0 uniform.
    Edge next();
    int support_size() const noexcept { return k_; }

private:
    int k_;
    double p_;
    CounterRng coord_rng_;
    CounterRng flip_rng_;
    std::uint32_t state_;
};

std::vector<EdgeWalk::Edge> edge_walk_stream(int support_size, double flip_prob, std::uint64_t seed,
                                             std::size_t n);

/// Trajectory dump: a `#` header recording the config and seed, then
/// `step,j_t,Z_t,y_t` rows. Row 0 holds y_0 with j_t = Z_t = 0.
void write_trajectory_csv(std::ostream& out, const WalkConfig& cfg, const BooleanFunction& f,
                          std::size_t steps);

}  // namespace tdj
