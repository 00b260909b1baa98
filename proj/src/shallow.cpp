#include "tdjunta/shallow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "tdjunta/format.hpp"

namespace tdj {

namespace {

Eigen::VectorXd to_vector(const HypercubePoint& x) {
    Eigen::VectorXd v(x.dim());
    const auto s = x.signs();
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = s[static_cast<std::size_t>(i)];
    return v;
}

void check_trajectory(std::span<const PairSample> pairs) {
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        if (hamming(pairs[t].prev, pairs[t].next) > 1) {
            throw std::invalid_argument("phase1: a pair differs in more than one coordinate");
        }
        if (t + 1 < pairs.size() && !(pairs[t].next == pairs[t + 1].prev)) {
            throw std::invalid_argument("phase1: pairs are not consecutive");
        }
    }
}

// Max |w_ij| over coordinates outside the support of f.
double off_support_weight(const TwoLayerNet& net, const BooleanFunction& f) {
    std::vector<bool> in_support(static_cast<std::size_t>(net.dim()), false);
    for (int c : f.support()) in_support[static_cast<std::size_t>(c - 1)] = true;
    double worst = 0.0;
    for (int j = 0; j < net.dim(); ++j) {
        if (!in_support[static_cast<std::size_t>(j)]) worst = std::max(worst, net.w.col(j).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Feature matrix over all 2^k support patterns, rows in pattern order.
Eigen::MatrixXd pattern_features(const TwoLayerNet& net, const BooleanFunction& f) {
    const int k = f.support_size();
    if (k > kMaxEnumeratedSupport) throw std::length_error("support larger than 12");
    if (net.dim() != f.dim()) throw std::invalid_argument("network and target dimensions differ");
    if (off_support_weight(net, f) != 0.0) {
        throw std::invalid_argument("first-layer weights do not vanish off the support");
    }
    const Eigen::Index n = Eigen::Index{1} << k;
    Eigen::MatrixXd phi(n, net.n_hidden());
    for (Eigen::Index s = 0; s < n; ++s) {
        phi.row(s) = hidden_features(net, pattern_point(f.dim(), f.support(), static_cast<std::uint64_t>(s)))
                         .transpose();
    }
    return phi;
}

Eigen::VectorXd table_vector(const BooleanFunction& f) {
    const auto table = f.support_table();
    return Eigen::Map<const Eigen::VectorXd>(table.data(), static_cast<Eigen::Index>(table.size()));
}

}  // namespace

TwoLayerNet init_algorithm1(int n_hidden, int dim, double kappa) {
    if (n_hidden < 1 || dim < 1) throw std::invalid_argument("init_algorithm1: sizes must be positive");
    TwoLayerNet net;
    net.w = Eigen::MatrixXd::Zero(n_hidden, dim);
    net.a = Eigen::VectorXd::Constant(n_hidden, kappa);
    net.b = Eigen::VectorXd::Constant(n_hidden, 1.0 / n_hidden);
    return net;
}

Eigen::VectorXd hidden_features(const TwoLayerNet& net, const HypercubePoint& x) {
    if (x.dim() != net.dim()) throw std::invalid_argument("forward: dimension mismatch");
    return (net.w * to_vector(x) + net.b).cwiseMax(0.0);
}

double forward(const TwoLayerNet& net, const HypercubePoint& x) { return net.a.dot(hidden_features(net, x)); }

void Phase1Config::validate() const {
    if (batch_size < 1) throw std::invalid_argument("Phase1Config: batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("Phase1Config: lr must be positive");
    if (!(init_scale > 0.0)) throw std::invalid_argument("Phase1Config: init_scale must be positive");
    if (steps < 1) throw std::invalid_argument("Phase1Config: steps must be >= 1");
}

void Phase2Config::validate() const {
    if (lr && !(*lr > 0.0)) throw std::invalid_argument("Phase2Config: lr must be positive");
    if (!(ridge >= 0.0)) throw std::invalid_argument("Phase2Config: ridge must be >= 0");
    if (steps < 1) throw std::invalid_argument("Phase2Config: steps must be >= 1");
    if (bias_range && !(*bias_range > 0.0)) throw std::invalid_argument("Phase2Config: bias_range must be positive");
}

double theorem_phase1_lr(std::size_t batch_size, int dim, double kappa, int support_size) {
    return std::sqrt(2.0 * static_cast<double>(batch_size) * dim) / (kappa * std::sqrt(double(support_size)));
}

Eigen::VectorXd phase1_closed_form_update(const BooleanFunction& f, std::span<const PairSample> pairs,
                                          const Phase1Config& cfg) {
    cfg.validate();
    if (pairs.size() != cfg.batch_size) throw std::invalid_argument("phase1: batch size does not match pairs");
    check_trajectory(pairs);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.dim());
    for (const auto& pair : pairs) {
        if (pair.prev.dim() != f.dim()) throw std::invalid_argument("phase1: dimension mismatch");
        const double df = pair.y_next - pair.y_prev;
        if (df == 0.0) continue;
        for (int j = 1; j <= f.dim(); ++j) {
            if (pair.next(j) != pair.prev(j)) g[j - 1] += df * (pair.next(j) - pair.prev(j));
        }
    }
    return g * (cfg.init_scale * cfg.lr / static_cast<double>(cfg.batch_size));
}

Eigen::MatrixXd phase1_autograd_update(const TwoLayerNet& net, std::span<const PairSample> pairs,
                                       const Phase1Config& cfg, const TdParams& loss) {
    cfg.validate();
    loss.validate();
    if (pairs.size() != cfg.batch_size) throw std::invalid_argument("phase1: batch size does not match pairs");
    check_trajectory(pairs);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(net.n_hidden(), net.dim());
    for (const auto& pair : pairs) {
        const Eigen::VectorXd x_prev = to_vector(pair.prev);
        const Eigen::VectorXd x_next = to_vector(pair.next);
        const Eigen::VectorXd pre_prev = net.w * x_prev + net.b;
        const Eigen::VectorXd pre_next = pair.prev == pair.next ? pre_prev : Eigen::VectorXd(net.w * x_next + net.b);
        const double yhat_prev = net.a.dot(pre_prev.cwiseMax(0.0));
        const double yhat_next = net.a.dot(pre_next.cwiseMax(0.0));
        const auto g = td_loss_output_grads(loss, pair.y_prev, pair.y_next, yhat_prev, yhat_next);
        if (g.g_prev == 0.0 && g.g_next == 0.0) continue;
        // d yhat / d w_i = a_i 1(pre_i >= 0) x.
        for (int i = 0; i < net.n_hidden(); ++i) {
            const double c_prev = pre_prev[i] >= 0.0 ? g.g_prev * net.a[i] : 0.0;
            const double c_next = pre_next[i] >= 0.0 ? g.g_next * net.a[i] : 0.0;
            grad.row(i) += c_prev * x_prev.transpose() + c_next * x_next.transpose();
        }
    }
    return grad * (-cfg.lr / static_cast<double>(cfg.batch_size));
}

NondegeneracyReport check_nondegeneracy(const Eigen::VectorXd& w_row, const BooleanFunction& f, double epsilon) {
    const int k = f.support_size();
    if (k > kMaxEnumeratedSupport) throw std::length_error("check_nondegeneracy: support larger than 12");
    if (w_row.size() != f.dim()) throw std::invalid_argument("check_nondegeneracy: dimension mismatch");
    const auto table = f.support_table();
    const std::size_t n = table.size();

    struct Point {
        double proj;
        double value;
        std::uint64_t pattern;
    };
    std::vector<Point> points(n);
    for (std::uint64_t s = 0; s < n; ++s) {
        double proj = 0.0;
        for (int m = 0; m < k; ++m) {
            const double sign = ((s >> (k - 1 - m)) & 1U) ? 1.0 : -1.0;
            proj += w_row[f.support()[static_cast<std::size_t>(m)] - 1] * sign;
        }
        points[s] = {proj, table[s], s};
    }
    std::sort(points.begin(), points.end(), [](const Point& l, const Point& r) {
        return l.proj < r.proj || (l.proj == r.proj && l.pattern < r.pattern);
    });
    auto distinct = [](double u, double v) {
        return std::abs(u - v) > 1e-9 * std::max({1.0, std::abs(u), std::abs(v)});
    };

    // The closest value-distinguishing pair is adjacent in projection order
    // once runs of equal value are skipped: any point strictly between two
    // such points differs in value from one of them and is at least as close.
    NondegeneracyReport report;
    report.epsilon = epsilon;
    report.min_margin = std::numeric_limits<double>::infinity();
    std::pair<std::uint64_t, std::uint64_t> best{};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double gap = points[j].proj - points[i].proj;
            if (gap >= report.min_margin) break;
            if (distinct(points[i].value, points[j].value)) {
                report.min_margin = gap;
                best = {points[i].pattern, points[j].pattern};
                break;
            }
        }
    }
    if (report.min_margin <= epsilon) report.violating_pair = best;
    return report;
}

TwoLayerNet redraw_biases(TwoLayerNet net, double bias_range, std::uint64_t seed) {
    if (!(bias_range > 0.0)) throw std::invalid_argument("redraw_biases: bias range must be positive");
    CounterRng rng(seed, Stream::BiasRedraw);
    for (Eigen::Index i = 0; i < net.b.size(); ++i) net.b[i] = rng.uniform(-bias_range, bias_range);
    return net;
}

CertificateResult certificate_solve(const TwoLayerNet& net, const BooleanFunction& f) {
    const Eigen::MatrixXd phi = pattern_features(net, f);
    const Eigen::VectorXd target = table_vector(f);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
    CertificateResult out;
    out.a_star = cod.solve(target);
    out.residual = (phi * out.a_star - target).cwiseAbs().maxCoeff();
    return out;
}

void phase2_sgd_step(TwoLayerNet& net, const HypercubePoint& x, double y, double lr, double ridge) {
    const Eigen::VectorXd phi = hidden_features(net, x);
    const double residual = net.a.dot(phi) - y;
    net.a -= lr * (residual * phi + ridge * net.a);
}

double exact_uniform_mse(const TwoLayerNet& net, const BooleanFunction& f) {
    const Eigen::MatrixXd phi = pattern_features(net, f);
    const Eigen::VectorXd err = phi * net.a - table_vector(f);
    return err.squaredNorm() / static_cast<double>(err.size());
}

double projected_mixing_time(int dim, int support_size, double flip_prob) {
    return dim / (2.0 * flip_prob) * (2.0 * support_size + 1.0) * std::log(2.0);
}

Phase2Theory theorem_phase2(const TwoLayerNet& net, const BooleanFunction& f, double delta, std::uint64_t steps,
                            double flip_prob) {
    if (!(delta > 0.0)) throw std::invalid_argument("theorem_phase2: delta must be positive");
    const Eigen::MatrixXd phi = pattern_features(net, f);  // 2^k x N
    const Eigen::VectorXd target = table_vector(f);
    const double n_pat = static_cast<double>(phi.rows());
    Phase2Theory th;
    const auto cert = certificate_solve(net, f);
    th.a_star_norm2 = cert.a_star.squaredNorm();
    th.ridge = th.a_star_norm2 > 0.0 ? delta / (3.0 * th.a_star_norm2) : delta;
    th.m_lambda = phi.rowwise().squaredNorm().maxCoeff() + th.ridge;
    th.tau_mix = projected_mixing_time(f.dim(), f.support_size(), flip_prob);

    // Ridge optimum of 2^-k sum_s 1/2 (a.Phi(s) - f(s))^2 + lambda/2 |a|^2, via
    // the 2^k x 2^k dual system.
    const Eigen::MatrixXd gram = phi * phi.transpose() / n_pat +
                                 th.ridge * Eigen::MatrixXd::Identity(phi.rows(), phi.rows());
    const Eigen::VectorXd a_ridge = phi.transpose() * gram.ldlt().solve(target / n_pat);
    for (Eigen::Index s = 0; s < phi.rows(); ++s) {
        const double r = phi.row(s).dot(a_ridge) - target[s];
        const Eigen::VectorXd g = r * phi.row(s).transpose() + th.ridge * a_ridge;
        th.sigma2_star = std::max(th.sigma2_star, g.squaredNorm());
    }
    const double dist0 = (net.a - a_ridge).squaredNorm();
    th.lr = 1.0 / th.m_lambda;
    const double t2 = static_cast<double>(steps);
    const double arg = th.ridge * th.ridge * t2 * dist0 / (th.m_lambda * th.tau_mix * th.sigma2_star);
    if (arg > 1.0 && std::isfinite(arg)) {
        const double alt = std::log(arg) / (th.ridge * t2);
        if (alt < th.lr) {
            th.lr = alt;
            th.log_branch = true;
        }
    }
    return th;
}

Algorithm1Result run_algorithm1(const BooleanFunction& f, const Algorithm1Config& cfg, std::uint64_t seed) {
    cfg.walk.validate();
    cfg.phase1.validate();
    cfg.phase2.validate();
    if (f.dim() != cfg.walk.dim) throw std::invalid_argument("run_algorithm1: target and walk dimensions differ");

    Algorithm1Result result;
    TwoLayerNet net = init_algorithm1(cfg.n_hidden, cfg.walk.dim, cfg.phase1.init_scale);
    LazyWalk walk(cfg.walk);

    // Phase I: first layer only, alpha = 1.
    std::vector<HypercubePoint> seen;
    for (int t = 0; t < cfg.phase1.steps; ++t) {
        const auto batch = pair_stream(walk, f, cfg.phase1.batch_size);
        net.w += phase1_autograd_update(net, batch, cfg.phase1);
        if (t + 1 == cfg.phase1.steps) {
            seen.reserve(batch.size());
            for (const auto& p : batch) seen.push_back(p.next);
        }
    }
    result.phase1_row = net.w.row(0).transpose();

    const double eta = cfg.phase1.init_scale * cfg.phase1.lr / static_cast<double>(cfg.phase1.batch_size);
    result.margin_epsilon = cfg.margin_epsilon.value_or(0.4 * eta);
    result.bias_range = cfg.phase2.bias_range.value_or(result.phase1_row.lpNorm<1>() + result.margin_epsilon);
    net = redraw_biases(std::move(net), result.bias_range, seed);

    double ridge = cfg.phase2.ridge;
    if (cfg.theorem_delta) {
        result.theory = theorem_phase2(net, f, *cfg.theorem_delta, cfg.phase2.steps, cfg.walk.flip_prob);
        ridge = result.theory->ridge;
        result.phase2_lr = result.theory->lr;
    } else if (cfg.phase2.lr) {
        result.phase2_lr = *cfg.phase2.lr;
    } else {
        // 1/M_lambda with R_Phi^2 taken over the last Phase-I batch.
        double r2 = 0.0;
        for (const auto& x : seen) r2 = std::max(r2, hidden_features(net, x).squaredNorm());
        result.phase2_lr = 1.0 / (r2 + ridge);
    }

    result.phase2_ridge = ridge;

    // Phase II: output weights only, one fresh walk step per update.
    const std::uint64_t phase1_samples = walk.step_count();
    const std::uint64_t log_every = cfg.log_every ? cfg.log_every : default_log_interval(cfg.phase2.steps);
    result.record = RunRecord({"train_loss", "test_mse"});
    double window_loss = 0.0;
    std::uint64_t window = 0;
    for (std::uint64_t t = 1; t <= cfg.phase2.steps; ++t) {
        walk.step();
        const HypercubePoint& x = walk.current();
        const double y = f.eval(x);
        const Eigen::VectorXd phi = hidden_features(net, x);
        const double residual = net.a.dot(phi) - y;
        window_loss += 0.5 * residual * residual + 0.5 * ridge * net.a.squaredNorm();
        ++window;
        net.a -= result.phase2_lr * (residual * phi + ridge * net.a);
        if (t % log_every == 0 || t == cfg.phase2.steps) {
            result.record.append(phase1_samples + t,
                                 {window_loss / static_cast<double>(window), exact_uniform_mse(net, f)});
            window_loss = 0.0;
            window = 0;
        }
    }
    result.net = std::move(net);
    return result;
}

std::string save_checkpoint(const TwoLayerNet& net, const std::string& phase, std::uint64_t step,
                            std::uint64_t seed) {
    auto hex = [](const auto& values) {
        nlohmann::json arr = nlohmann::json::array();
        for (Eigen::Index i = 0; i < values.size(); ++i) arr.push_back(to_hexfloat(values(i)));
        return arr;
    };
    nlohmann::json j;
    j["format"] = "tdjunta.two_layer.v1";
    j["n_hidden"] = net.n_hidden();
    j["dim"] = net.dim();
    j["phase"] = phase;
    j["step"] = step;
    j["seed"] = seed;
    // Row-major weights.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = net.w;
    j["w"] = hex(w.reshaped<Eigen::RowMajor>());
    j["a"] = hex(net.a);
    j["b"] = hex(net.b);
    return j.dump(1);
}

TwoLayerCheckpoint load_checkpoint(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.at("format") != "tdjunta.two_layer.v1") throw std::invalid_argument("checkpoint: unknown format");
    const int n = j.at("n_hidden");
    const int d = j.at("dim");
    auto read = [](const nlohmann::json& arr, Eigen::Index expected) {
        if (static_cast<Eigen::Index>(arr.size()) != expected) throw std::invalid_argument("checkpoint: bad length");
        Eigen::VectorXd v(expected);
        for (Eigen::Index i = 0; i < expected; ++i) v[i] = parse_double(arr[static_cast<std::size_t>(i)].get<std::string>());
        return v;
    };
    TwoLayerCheckpoint cp;
    const Eigen::VectorXd w = read(j.at("w"), Eigen::Index{n} * d);
    cp.net.w = w.reshaped<Eigen::RowMajor>(n, d);
    cp.net.a = read(j.at("a"), n);
    cp.net.b = read(j.at("b"), n);
    cp.phase = j.at("phase");
    cp.step = j.at("step");
    cp.seed = j.at("seed");
    return cp;
}

}  // namespace tdj
