#include "tdjunta/walk.hpp"

#include <ostream>
#include <stdexcept>

#include "tdjunta/format.hpp"

namespace tdj {

void WalkConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("walk: dim must be >= 1");
    if (!(flip_prob > 0.0 && flip_prob < 1.0)) throw std::invalid_argument("walk: flip_prob must lie in (0,1)");
}

HypercubePoint uniform_point(int dim, CounterRng& rng) {
    std::vector<std::int8_t> signs(static_cast<std::size_t>(dim));
    for (auto& s : signs) s = static_cast<std::int8_t>(rng.sign());
    return HypercubePoint(std::move(signs));
}

LazyWalk::LazyWalk(const WalkConfig& cfg)
    : cfg_(cfg), coord_rng_(cfg.seed, Stream::Coordinate), flip_rng_(cfg.seed, Stream::Flip) {
    cfg_.validate();
    CounterRng init(cfg.seed, Stream::InitialPoint);
    current_ = uniform_point(cfg.dim, init);
}

LazyWalk::LazyWalk(const WalkConfig& cfg, HypercubePoint current, std::uint64_t step_count,
                   CounterRng coord_rng, CounterRng flip_rng)
    : cfg_(cfg),
      current_(std::move(current)),
      steps_(step_count),
      coord_rng_(coord_rng),
      flip_rng_(flip_rng) {
    cfg_.validate();
    if (current_.dim() != cfg.dim) throw std::invalid_argument("LazyWalk: state dimension mismatch");
}

const WalkMove& LazyWalk::step() {
    WalkMove move;
    move.coord = static_cast<int>(coord_rng_.uniform_index(static_cast<std::uint64_t>(cfg_.dim))) + 1;
    move.flipped = flip_rng_.bernoulli(cfg_.flip_prob);
    if (move.flipped) current_.flip(move.coord);
    ++steps_;
    last_ = move;
    return *last_;
}

PairSample next_pair(LazyWalk& walk, const BooleanFunction& f) {
    PairSample s;
    s.prev = walk.current();
    s.y_prev = f.eval(s.prev);
    s.move = walk.step();
    s.next = walk.current();
    // An off-support or lazy move leaves f unchanged; reuse the label so the
    // increment is exactly zero.
    s.y_next = s.prev == s.next ? s.y_prev : f.eval(s.next);
    return s;
}

std::vector<PairSample> pair_stream(LazyWalk& walk, const BooleanFunction& f, std::size_t n) {
    if (f.dim() != walk.config().dim) throw std::invalid_argument("pair_stream: dimension mismatch");
    std::vector<PairSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(next_pair(walk, f));
    return out;
}

IidSampler::IidSampler(int dim, std::uint64_t seed) : dim_(dim), rng_(seed, Stream::InitialPoint) {
    if (dim < 1) throw std::invalid_argument("IidSampler: dim must be >= 1");
}

HypercubePoint IidSampler::next() { return uniform_point(dim_, rng_); }

std::vector<std::pair<HypercubePoint, double>> iid_stream(int dim, std::uint64_t seed,
                                                          const BooleanFunction& f, std::size_t n) {
    if (f.dim() != dim) throw std::invalid_argument("iid_stream: dimension mismatch");
    IidSampler sampler(dim, seed);
    std::vector<std::pair<HypercubePoint, double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = sampler.next();
        const double y = f.eval(x);
        out.emplace_back(std::move(x), y);
    }
    return out;
}

double spectral_gap(int dim, double flip_prob) {
    WalkConfig{dim, flip_prob, 0}.validate();
    return 2.0 * flip_prob / dim;
}

Eigen::MatrixXd projected_chain_kernel(int support_size, int dim, double flip_prob) {
    if (support_size > kMaxDenseKernel) throw std::length_error("projected_chain_kernel: k exceeds 12");
    if (support_size < 0 || support_size > dim) throw std::invalid_argument("projected_chain_kernel: need 0 <= k <= d");
    WalkConfig{dim, flip_prob, 0}.validate();
    const Eigen::Index n = Eigen::Index{1} << support_size;
    const double move = flip_prob / dim;
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        kernel(s, s) = 1.0 - support_size * move;
        for (int j = 0; j < support_size; ++j) kernel(s, s ^ (Eigen::Index{1} << j)) = move;
    }
    return kernel;
}

EdgeWalk::EdgeWalk(int support_size, double flip_prob, std::uint64_t seed)
    : k_(support_size), p_(flip_prob), coord_rng_(seed, Stream::Coordinate), flip_rng_(seed, Stream::Flip) {
    if (k_ < 1 || k_ > 20) throw std::invalid_argument("EdgeWalk: support size must lie in [1, 20]");
    WalkConfig{k_, p_, seed}.validate();
    CounterRng init(seed, Stream::InitialPoint);
    state_ = static_cast<std::uint32_t>(init.uniform_index(std::uint64_t{1} << k_));
}

EdgeWalk::Edge EdgeWalk::next() {
    const std::uint32_t from = state_;
    const auto j = static_cast<int>(coord_rng_.uniform_index(static_cast<std::uint64_t>(k_)));
    if (flip_rng_.bernoulli(p_)) state_ ^= std::uint32_t{1} << (k_ - 1 - j);
    return {from, state_};
}

std::vector<EdgeWalk::Edge> edge_walk_stream(int support_size, double flip_prob, std::uint64_t seed,
                                             std::size_t n) {
    EdgeWalk walk(support_size, flip_prob, seed);
    std::vector<EdgeWalk::Edge> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(walk.next());
    return out;
}

void write_trajectory_csv(std::ostream& out, const WalkConfig& cfg, const BooleanFunction& f,
                          std::size_t steps) {
    LazyWalk walk(cfg);
    out << "# lazy_walk dim=" << cfg.dim << " flip_prob=" << format_double(cfg.flip_prob)
        << " seed=" << cfg.seed << "\n";
    out << "step,j_t,Z_t,y_t\n";
    out << "0,0,0," << format_double(f.eval(walk.current())) << "\n";
    for (std::size_t t = 1; t <= steps; ++t) {
        const auto move = walk.step();
        out << t << ',' << move.coord << ',' << (move.flipped ? 1 : 0) << ','
            << format_double(f.eval(walk.current())) << "\n";
    }
}

}  // namespace tdj
