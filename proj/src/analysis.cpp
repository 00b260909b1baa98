#include "tdjunta/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "tdjunta/shallow.hpp"

namespace tdj {

namespace {

Estimate mean_estimate(const std::vector<double>& xs) {
    Estimate e;
    e.n = xs.size();
    if (xs.empty()) return e;
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    e.value = mean;
    e.std_error = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return e;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

int pattern_sign(std::uint32_t pattern, int k, int m) { return (pattern >> (k - 1 - m)) & 1U ? 1 : -1; }

}  // namespace

double uniform_mse_exact(const Predictor& predictor, const BooleanFunction& f) {
    const Subset support = f.support();
    const auto k = static_cast<int>(support.size());
    if (k > kMaxEnumeratedSupport) throw std::length_error("uniform_mse_exact: support too large to enumerate");
    const auto table = f.support_table();
    double total = 0.0;
    for (std::uint64_t u = 0; u < table.size(); ++u) {
        const double r = predictor(pattern_point(f.dim(), support, u)) - table[u];
        total += r * r;
    }
    return total / static_cast<double>(table.size());
}

Estimate uniform_mse_mc(const Predictor& predictor, const BooleanFunction& f, std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed, Stream::Estimator);
    std::vector<double> sq(n);
    for (auto& s : sq) {
        const auto x = uniform_point(f.dim(), rng);
        const double r = predictor(x) - f.eval(x);
        s = r * r;
    }
    return mean_estimate(sq);
}

double sign_accuracy(const Predictor& predictor, const BooleanFunction& f, std::span<const HypercubePoint> points) {
    if (!f.is_boolean_valued()) throw std::invalid_argument("sign_accuracy: target is not +-1-valued");
    if (points.empty()) throw std::invalid_argument("sign_accuracy: empty test set");
    std::size_t agree = 0;
    for (const auto& x : points) agree += (predictor(x) >= 0.0) == (f.eval(x) >= 0.0);
    return static_cast<double>(agree) / static_cast<double>(points.size());
}

Estimate net_fourier_coeff(const Predictor& predictor, int dim, const Subset& subset, std::size_t n,
                           std::uint64_t seed) {
    CounterRng rng(seed, Stream::Estimator);
    std::vector<double> vals(n);
    for (auto& v : vals) {
        const auto x = uniform_point(dim, rng);
        v = predictor(x) * x.character(subset);
    }
    return mean_estimate(vals);
}

BaselineResult baseline_support_recovery(const BooleanFunction& f, const WalkConfig& walk_cfg,
                                         const BaselineConfig& cfg) {
    walk_cfg.validate();
    const double d = walk_cfg.dim;
    const std::uint64_t patience =
        cfg.patience ? cfg.patience
                     : static_cast<std::uint64_t>(std::ceil(10.0 * d / walk_cfg.flip_prob * std::log(std::max(d, 2.0))));
    LazyWalk walk(walk_cfg);
    std::vector<bool> found(static_cast<std::size_t>(walk_cfg.dim) + 1, false);
    BaselineResult out;
    double y = f.eval(walk.current());
    std::uint64_t last_new = 0;
    while (true) {
        if (walk.step_count() - last_new >= patience) break;
        if (walk.step_count() >= cfg.step_cap) {
            out.capped = true;
            break;
        }
        const auto& move = walk.step();
        if (!move.flipped) continue;
        const double y_next = f.eval(walk.current());
        if (y_next != y && !found[static_cast<std::size_t>(move.coord)]) {
            found[static_cast<std::size_t>(move.coord)] = true;
            last_new = walk.step_count();
            out.discovery_step = last_new;
        }
        y = y_next;
    }
    out.steps_used = walk.step_count();
    for (int j = 1; j <= walk_cfg.dim; ++j) {
        if (found[static_cast<std::size_t>(j)]) out.support.push_back(j);
    }
    return out;
}

std::string to_string(CpMethod m) {
    switch (m) {
        case CpMethod::Exact: return "exact";
        case CpMethod::Mc: return "mc";
        case CpMethod::RwBatch: return "rw_batch";
    }
    return "unknown";
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c < 0x1p53 ? std::round(c) : c;
}

double cp_exact_parity_orbit(int dim, int k) {
    if (k < 1 || k > dim) throw std::invalid_argument("cp_exact_parity_orbit: need 1 <= k <= d");
    return 1.0 / binomial(dim, k);
}

namespace {

std::vector<std::uint32_t> subsets_of_size(int dim, int k) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1U << dim); ++m) {
        if (std::popcount(m) == k) out.push_back(m);
    }
    return out;
}

}  // namespace

double cp_bruteforce_parity_orbit(int dim, int k) {
    if (dim < 1 || dim > 12) throw std::invalid_argument("cp_bruteforce_parity_orbit: need 1 <= d <= 12");
    if (k < 1 || k > dim) throw std::invalid_argument("cp_bruteforce_parity_orbit: need 1 <= k <= d");
    const auto orbit = subsets_of_size(dim, k);
    const std::uint32_t n_points = 1U << dim;
    double total = 0.0;
    for (auto s : orbit) {
        for (auto t : orbit) {
            // x as a bitmask of -1 coordinates: chi_S(x) chi_T(x) = (-1)^{|x & (S ^ T)|}
            double inner = 0.0;
            for (std::uint32_t x = 0; x < n_points; ++x) inner += (std::popcount(x & (s ^ t)) & 1) ? -1.0 : 1.0;
            inner /= n_points;
            total += inner * inner;
        }
    }
    const double n = static_cast<double>(orbit.size());
    return total / (n * n);
}

namespace {

double normalized_esf(std::span<const double> z, int k) {
    const auto d = static_cast<int>(z.size());
    if (k < 0 || k > d) throw std::invalid_argument("orbit kernel: need 0 <= k <= d");
    std::vector<double> q(static_cast<std::size_t>(k) + 1, 0.0);
    q[0] = 1.0;
    for (int m = 1; m <= d; ++m) {
        const double zm = z[static_cast<std::size_t>(m - 1)];
        for (int j = std::min(m, k); j >= 1; --j) {
            q[j] = (static_cast<double>(m - j) / m) * q[j] + (static_cast<double>(j) / m) * zm * q[j - 1];
        }
    }
    return q[static_cast<std::size_t>(k)];
}

/// K as a function of the Hamming distance h between the two points.
std::vector<double> kernel_by_distance(int dim, int k) {
    std::vector<double> table(static_cast<std::size_t>(dim) + 1);
    std::vector<double> z(static_cast<std::size_t>(dim), 1.0);
    for (int h = 0; h <= dim; ++h) {
        if (h > 0) z[static_cast<std::size_t>(h - 1)] = -1.0;
        table[static_cast<std::size_t>(h)] = normalized_esf(z, k);
    }
    return table;
}

std::uint64_t minus_mask(const HypercubePoint& x) {
    std::uint64_t m = 0;
    const auto s = x.signs();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 0) m |= std::uint64_t{1} << i;
    }
    return m;
}

}  // namespace

double orbit_kernel_parity(const HypercubePoint& x, const HypercubePoint& y, int k) {
    if (x.dim() != y.dim()) throw std::invalid_argument("orbit_kernel_parity: dimension mismatch");
    std::vector<double> z(static_cast<std::size_t>(x.dim()));
    for (int i = 1; i <= x.dim(); ++i) z[static_cast<std::size_t>(i - 1)] = x(i) * y(i);
    return normalized_esf(z, k);
}

double orbit_kernel_bruteforce(const HypercubePoint& x, const HypercubePoint& y, int k) {
    if (x.dim() != y.dim()) throw std::invalid_argument("orbit_kernel_bruteforce: dimension mismatch");
    if (x.dim() > 16) throw std::invalid_argument("orbit_kernel_bruteforce: d <= 16");
    const std::uint64_t diff = minus_mask(x) ^ minus_mask(y);
    const auto orbit = subsets_of_size(x.dim(), k);
    double total = 0.0;
    for (auto s : orbit) total += (std::popcount(diff & s) & 1) ? -1.0 : 1.0;
    return total / static_cast<double>(orbit.size());
}

CpEstimate cp_mc(int dim, int k, std::size_t n, std::uint64_t seed) {
    if (k < 1 || k > dim) throw std::invalid_argument("cp_mc: need 1 <= k <= d");
    CounterRng rng(seed, Stream::Estimator);
    std::vector<double> vals(n);
    for (auto& v : vals) {
        const auto x = uniform_point(dim, rng);
        const auto y = uniform_point(dim, rng);
        const double kxy = orbit_kernel_parity(x, y, k);
        v = kxy * kxy;
    }
    const auto e = mean_estimate(vals);
    return {e.value, e.std_error, CpMethod::Mc, n};
}

CpEstimate cp_rw_batch(int dim, int k, double flip_prob, std::size_t batch, std::size_t n_outer,
                       std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("cp_rw_batch: B must be >= 1");
    if (dim > 64) throw std::invalid_argument("cp_rw_batch: d <= 64");
    if (k < 1 || k > dim) throw std::invalid_argument("cp_rw_batch: need 1 <= k <= d");
    const auto table = kernel_by_distance(dim, k);
    std::vector<double> sq(table.size());
    for (std::size_t h = 0; h < table.size(); ++h) sq[h] = table[h] * table[h];

    std::vector<double> vals(n_outer);
    std::vector<std::uint64_t> pts(batch);
    for (std::size_t r = 0; r < n_outer; ++r) {
        LazyWalk walk(WalkConfig{dim, flip_prob, derive_seed(seed, r)});
        for (std::size_t i = 0; i < batch; ++i) {
            if (i > 0) walk.step();
            pts[i] = minus_mask(walk.current());
        }
        double off = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = i + 1; j < batch; ++j) off += sq[static_cast<std::size_t>(std::popcount(pts[i] ^ pts[j]))];
        }
        const double b = static_cast<double>(batch);
        vals[r] = (b * sq[0] + 2.0 * off) / (b * b);
    }
    const auto e = mean_estimate(vals);
    return {e.value, e.std_error, CpMethod::RwBatch, n_outer};
}

double lower_bound_rhs(double steps, double model_size, double grad_range, double tau_noise, double cp, int dim,
                       double flip_prob, double batch) {
    if (!(steps >= 0.0)) throw std::invalid_argument("lower_bound_rhs: T must be >= 0");
    if (!(model_size > 0.0) || !(grad_range > 0.0) || !(cp > 0.0) || dim < 1 || !(flip_prob > 0.0) ||
        !(batch > 0.0)) {
        throw std::invalid_argument("lower_bound_rhs: parameters must be positive");
    }
    if (!(tau_noise > 0.0)) throw std::invalid_argument("lower_bound_rhs: tau must be positive");
    const double gap = cp + dim / (flip_prob * batch);
    return 0.5 + steps * std::sqrt(model_size) * grad_range / (2.0 * tau_noise) * std::pow(gap, 0.25);
}

// ---------------------------------------------------------------------------

namespace {

int log2_exact(std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("table size must be a power of two");
    return std::countr_zero(n);
}

bool values_differ(double a, double b) { return std::abs(a - b) > 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

PhiObservable::PhiObservable(std::vector<double> table, std::vector<int> v)
    : table_(std::move(table)), v_(std::move(v)) {
    k_ = log2_exact(table_.size());
    if (k_ < 1 || k_ > kMaxTableSupport) throw std::invalid_argument("phi: support size must lie in [1, 20]");
    if (static_cast<int>(v_.size()) != k_) throw std::invalid_argument("phi: direction has wrong length");
    std::uint32_t fixed_s = 0;
    std::uint32_t fixed_r = 0;
    std::uint32_t free_mask = 0;
    for (int m = 0; m < k_; ++m) {
        const std::uint32_t bit = 1U << (k_ - 1 - m);
        switch (v_[static_cast<std::size_t>(m)]) {
            case 2: fixed_s |= bit; break;
            case -2: fixed_r |= bit; break;
            case 0: free_mask |= bit; break;
            default: throw std::invalid_argument("phi: direction entries must be -2, 0 or 2");
        }
    }
    // v = s - r leaves the zero coordinates shared; look for one assignment that
    // separates the values.
    bool ok = false;
    for (std::uint32_t sub = free_mask;; sub = (sub - 1) & free_mask) {
        if (values_differ(table_[fixed_s | sub], table_[fixed_r | sub])) {
            ok = true;
            break;
        }
        if (sub == 0) break;
    }
    if (!ok) throw std::invalid_argument("phi: direction is not s - r for any pair with f(s) != f(r)");
}

PhiObservable PhiObservable::from_patterns(const BooleanFunction& f, std::uint64_t s, std::uint64_t r) {
    const auto k = static_cast<int>(f.support().size());
    const std::uint64_t n = std::uint64_t{1} << k;
    if (s >= n || r >= n) throw std::invalid_argument("phi: pattern out of range");
    std::vector<int> v(static_cast<std::size_t>(k));
    for (int m = 0; m < k; ++m) {
        const auto s_m = pattern_sign(static_cast<std::uint32_t>(s), k, m);
        const auto r_m = pattern_sign(static_cast<std::uint32_t>(r), k, m);
        v[static_cast<std::size_t>(m)] = s_m - r_m;
    }
    const auto table = f.support_table();
    if (!values_differ(table[s], table[r])) throw std::invalid_argument("phi: f(s) == f(r)");
    return PhiObservable(table, std::move(v));
}

PhiObservable PhiObservable::from_function(const BooleanFunction& f, std::vector<int> v) {
    return PhiObservable(f.support_table(), std::move(v));
}

double PhiObservable::operator()(std::uint32_t from, std::uint32_t to) const {
    double dot = 0.0;
    for (std::uint32_t diff = from ^ to; diff; diff &= diff - 1) {
        const int bit = std::countr_zero(diff);
        const int m = k_ - 1 - bit;
        const double step = (to >> bit) & 1U ? 2.0 : -2.0;  // y_m - x_m
        dot += step * v_[static_cast<std::size_t>(m)];
    }
    return (table_[to] - table_[from]) * dot;
}

std::size_t phi_batch_length(int k, double flip_prob) {
    return static_cast<std::size_t>(std::ceil(10.0 * k * k / flip_prob));
}

namespace {

struct ExactPhi {
    double mean_formula = 0.0;
    double mean = 0.0;
    double second_formula = 0.0;
    double second = 0.0;
    double variance = 0.0;
    double sigma2 = 0.0;
};

ExactPhi exact_phi(const PhiObservable& phi, double p) {
    const int k = phi.support_size();
    if (k > kMaxPhiEnumeration) throw std::length_error("phi: enumeration limited to k <= 12");
    const auto& t = phi.table();
    const auto& v = phi.direction();
    const std::uint32_t n = 1U << k;
    const double nd = n;
    ExactPhi e;

    for (int m = 0; m < k; ++m) {
        double fhat = 0.0;
        double inf = 0.0;
        const std::uint32_t bit = 1U << (k - 1 - m);
        for (std::uint32_t u = 0; u < n; ++u) {
            fhat += t[u] * pattern_sign(u, k, m);
            const double diff = t[u] - t[u ^ bit];
            inf += diff * diff / 4.0;
        }
        fhat /= nd;
        inf /= nd;
        e.mean_formula += v[static_cast<std::size_t>(m)] * fhat;
        if (v[static_cast<std::size_t>(m)] != 0) e.second_formula += inf;
    }
    e.mean_formula *= 4.0 * p / k;
    e.second_formula *= 64.0 * p / k;

    // Stationary edge law: x uniform, coordinate uniform over [k], flip w.p. p.
    // Self-loops contribute phi = 0.
    const double w = p / (k * nd);
    std::vector<double> h(n, 0.0);  // E[phi | X_1 = y]
    for (std::uint32_t u = 0; u < n; ++u) {
        for (int m = 0; m < k; ++m) {
            const std::uint32_t y = u ^ (1U << (k - 1 - m));
            const double val = phi(u, y);
            e.mean += w * val;
            e.second += w * val * val;
            h[y] += (p / k) * val;
        }
    }
    e.variance = e.second - e.mean * e.mean;

    walsh_hadamard(h);
    double tail = 0.0;
    for (std::uint32_t s = 1; s < n; ++s) {
        const double coeff = h[s] / nd;
        tail += coeff * coeff * k / (2.0 * p * std::popcount(s));
    }
    e.sigma2 = e.variance + 2.0 * tail;
    return e;
}

struct BatchMeans {
    Estimate mean;
    Estimate sigma2;
};

BatchMeans batch_means(const std::vector<double>& xs, std::size_t len) {
    BatchMeans out;
    const std::size_t n_batches = xs.size() / len;
    if (n_batches < 2) throw std::invalid_argument("batch means: need at least two batches");
    std::vector<double> means(n_batches, 0.0);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
        means[b] = s / static_cast<double>(len);
    }
    const auto e = mean_estimate(means);
    const double nb = static_cast<double>(n_batches);
    const double var_means = e.std_error * e.std_error * nb;
    const double sigma2 = var_means * static_cast<double>(len);
    out.mean = {e.value, e.std_error, xs.size()};
    out.sigma2 = {sigma2, sigma2 * std::sqrt(2.0 / (nb - 1.0)), n_batches};
    return out;
}

}  // namespace

PhiMoments phi_moments(const PhiObservable& phi, double flip_prob, std::size_t n_steps, std::uint64_t seed) {
    const int k = phi.support_size();
    WalkConfig{k, flip_prob, seed}.validate();
    const auto ex = exact_phi(phi, flip_prob);
    PhiMoments out;
    out.mean_formula = ex.mean_formula;
    out.mean_enumerated = ex.mean;
    out.second_formula = ex.second_formula;
    out.second_enumerated = ex.second;
    out.variance = ex.variance;
    out.sigma2_exact = ex.sigma2;
    out.batch_length = phi_batch_length(k, flip_prob);
    out.n_steps = n_steps;

    EdgeWalk walk(k, flip_prob, seed);
    std::vector<double> vals(n_steps);
    std::vector<double> squares(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const auto [u, y] = walk.next();
        vals[i] = phi(u, y);
        squares[i] = vals[i] * vals[i];
    }
    const auto bm = batch_means(vals, out.batch_length);
    out.mean_mc = bm.mean;
    out.sigma2_batch = bm.sigma2;
    out.second_mc = batch_means(squares, out.batch_length).mean;
    return out;
}

double CltReport::ratio() const {
    if (ks_exact && ks_exact_scaled) return *ks_exact / *ks_exact_scaled;
    return ks_mc / ks_mc_scaled;
}

double ks_distance_normal(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("ks_distance_normal: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = normal_cdf(sample[i]);
        d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
    }
    return d;
}

std::optional<double> clt_exact_ks(const PhiObservable& phi, double flip_prob, std::size_t steps) {
    const int k = phi.support_size();
    if (k > 4 || steps == 0) return std::nullopt;
    const std::uint32_t n = 1U << k;

    // Transition matrix with phi on each edge, and the lattice spacing.
    Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd val = Eigen::MatrixXd::Zero(n, n);
    double h = std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
    for (std::uint32_t u = 0; u < n; ++u) {
        prob(u, u) = 1.0 - flip_prob;
        for (int m = 0; m < k; ++m) {
            const std::uint32_t y = u ^ (1U << (k - 1 - m));
            prob(u, y) += flip_prob / k;
            val(u, y) = phi(u, y);
            if (std::abs(val(u, y)) > 1e-12) h = std::min(h, std::abs(val(u, y)));
            max_abs = std::max(max_abs, std::abs(val(u, y)));
        }
    }
    if (!std::isfinite(h)) return std::nullopt;
    Eigen::MatrixXi lattice = Eigen::MatrixXi::Zero(n, n);
    for (std::uint32_t u = 0; u < n; ++u) {
        for (std::uint32_t y = 0; y < n; ++y) {
            const double q = val(u, y) / h;
            if (std::abs(q - std::round(q)) > 1e-9) return std::nullopt;
            lattice(u, y) = static_cast<int>(std::round(q));
        }
    }

    const auto ex = exact_phi(phi, flip_prob);
    const double t = static_cast<double>(steps);
    const double spread = std::sqrt(ex.sigma2 * t) / h;
    const double range = 2.0 * t * max_abs / h + 1.0;
    std::size_t len = 64;
    while (len < std::min(range, 24.0 * spread + 64.0)) len *= 2;

    // Characteristic function of S_T / h at theta_j = 2 pi j / len.
    using Cplx = std::complex<double>;
    using CMat = Eigen::Matrix<Cplx, Eigen::Dynamic, Eigen::Dynamic>;
    std::vector<Cplx> psi(len);
    for (std::size_t j = 0; j < len; ++j) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len);
        CMat m(n, n);
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::uint32_t y = 0; y < n; ++y) m(u, y) = prob(u, y) * std::polar(1.0, theta * lattice(u, y));
        }
        CMat acc = CMat::Identity(n, n);
        for (std::size_t e = steps; e; e >>= 1) {
            if (e & 1U) acc = acc * m;
            if (e > 1) m = m * m;
        }
        psi[j] = acc.sum() / static_cast<double>(n);
    }
    Eigen::FFT<double> fft;
    std::vector<Cplx> law;
    fft.fwd(law, psi);  // sum_j psi_j e^{-2 pi i j r / len}

    // Unwrap residues into a window centred on the mean.
    const auto centre = static_cast<long long>(std::llround(t * ex.mean / h));
    const auto half = static_cast<long long>(len / 2);
    std::vector<double> mass(len);
    for (long long idx = 0; idx < static_cast<long long>(len); ++idx) {
        const long long value = centre - half + idx;
        long long r = value % static_cast<long long>(len);
        if (r < 0) r += static_cast<long long>(len);
        mass[static_cast<std::size_t>(idx)] = law[static_cast<std::size_t>(r)].real() / static_cast<double>(len);
    }
    const double sd = std::sqrt(ex.sigma2 * t);
    double cdf = 0.0;
    double ks = 0.0;
    for (long long idx = 0; idx < static_cast<long long>(len); ++idx) {
        const double x = static_cast<double>(centre - half + idx) * h;
        const double g = normal_cdf((x - t * ex.mean) / sd);
        ks = std::max(ks, std::abs(cdf - g));
        cdf += mass[static_cast<std::size_t>(idx)];
        ks = std::max(ks, std::abs(cdf - g));
    }
    return ks;
}

CltReport clt_check(const PhiObservable& phi, double flip_prob, const CltConfig& cfg, std::uint64_t seed) {
    if (cfg.steps == 0 || cfg.replicas == 0 || cfg.scale < 2) throw std::invalid_argument("clt_check: bad config");
    const int k = phi.support_size();
    const auto ex = exact_phi(phi, flip_prob);
    CltReport out;
    out.mean = ex.mean;

    EdgeWalk sigma_walk(k, flip_prob, derive_seed(seed, 0));
    std::vector<double> vals(cfg.sigma_steps);
    for (auto& x : vals) {
        const auto [u, y] = sigma_walk.next();
        x = phi(u, y);
    }
    out.sigma2_batch = batch_means(vals, phi_batch_length(k, flip_prob)).sigma2.value;
    if (!(out.sigma2_batch > 0.0)) throw std::invalid_argument("clt_check: degenerate dynamical variance");
    const double sigma = std::sqrt(out.sigma2_batch);

    auto ks_at = [&](std::size_t steps, std::uint64_t stream) {
        std::vector<double> z(cfg.replicas);
        const double t = static_cast<double>(steps);
        for (std::size_t r = 0; r < cfg.replicas; ++r) {
            EdgeWalk walk(k, flip_prob, derive_seed(derive_seed(seed, stream), r));
            double sum = 0.0;
            for (std::size_t i = 0; i < steps; ++i) {
                const auto [u, y] = walk.next();
                sum += phi(u, y);
            }
            z[r] = (sum - t * out.mean) / (sigma * std::sqrt(t));
        }
        return ks_distance_normal(std::move(z));
    };
    out.ks_mc = ks_at(cfg.steps, 1);
    out.ks_mc_scaled = ks_at(cfg.steps * cfg.scale, 2);
    out.ks_exact = clt_exact_ks(phi, flip_prob, cfg.steps);
    out.ks_exact_scaled = clt_exact_ks(phi, flip_prob, cfg.steps * cfg.scale);
    const bool shrinks = out.ks_exact && out.ks_exact_scaled ? *out.ks_exact_scaled < *out.ks_exact
                                                             : out.ks_mc_scaled < out.ks_mc;
    out.pass = out.ks_mc < cfg.ceiling && shrinks;
    return out;
}

}  // namespace tdj
