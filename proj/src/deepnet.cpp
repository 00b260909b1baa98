#include "tdjunta/deepnet.hpp"

#include <cmath>
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

void check_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("mlp: layer dims must be positive");
    }
    if (dims.back() != 1) throw std::invalid_argument("mlp: output dim must be 1");
}

}  // namespace

std::size_t MlpNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

MlpNet mlp_init(std::vector<int> layer_dims, std::uint64_t seed) {
    check_dims(layer_dims);
    CounterRng rng(seed, Stream::NetInit);
    MlpNet net;
    net.layer_dims = std::move(layer_dims);
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        const int in = net.layer_dims[l];
        const int out = net.layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        DenseLayer layer;
        layer.weight.resize(out, in);
        layer.bias.resize(out);
        for (Eigen::Index i = 0; i < out; ++i) {
            for (Eigen::Index j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
        }
        for (Eigen::Index i = 0; i < out; ++i) layer.bias[i] = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

double mlp_forward(const MlpNet& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim()) throw std::invalid_argument("mlp_forward: dimension mismatch");
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Eigen::VectorXd z = net.layers[l].weight * h + net.layers[l].bias;
        h = l + 1 < net.layers.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return h[0];
}

double mlp_forward(const MlpNet& net, const HypercubePoint& x) { return mlp_forward(net, to_vector(x)); }

Eigen::VectorXd mlp_forward_batch(const MlpNet& net, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != net.input_dim()) throw std::invalid_argument("mlp_forward_batch: dimension mismatch");
    Eigen::MatrixXd h = inputs;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Eigen::MatrixXd z = net.layers[l].weight * h;
        z.colwise() += net.layers[l].bias;
        h = l + 1 < net.layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return h.row(0).transpose();
}

MlpWorkspace::MlpWorkspace(const MlpNet& net)
    : inputs_(net.layers.size()), pre_(net.layers.size()), delta_(net.layers.size()) {}

double MlpWorkspace::forward(const MlpNet& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim()) throw std::invalid_argument("mlp forward: dimension mismatch");
    const std::size_t n = net.layers.size();
    for (std::size_t l = 0; l < n; ++l) {
        if (l == 0) {
            inputs_[0] = x;
        } else {
            inputs_[l] = pre_[l - 1].cwiseMax(0.0);
        }
        pre_[l].noalias() = net.layers[l].weight * inputs_[l];
        pre_[l] += net.layers[l].bias;
    }
    output_ = pre_[n - 1][0];
    return output_;
}

void MlpWorkspace::backward(const MlpNet& net, double output_grad) {
    const std::size_t n = net.layers.size();
    delta_[n - 1] = Eigen::VectorXd::Constant(1, output_grad);
    for (std::size_t l = n - 1; l > 0; --l) {
        delta_[l - 1].noalias() = net.layers[l].weight.transpose() * delta_[l];
        delta_[l - 1] = (pre_[l - 1].array() >= 0.0).select(delta_[l - 1], 0.0);
    }
}

void MlpWorkspace::accumulate(MlpGradient& grad) const {
    for (std::size_t l = 0; l < grad.layers.size(); ++l) {
        grad.layers[l].weight.noalias() += delta_[l] * inputs_[l].transpose();
        grad.layers[l].bias += delta_[l];
    }
}

void MlpWorkspace::apply(MlpNet& net, double lr) const {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].weight.noalias() -= (lr * delta_[l]) * inputs_[l].transpose();
        net.layers[l].bias -= lr * delta_[l];
    }
}

MlpGradient zero_gradient(const MlpNet& net) {
    MlpGradient g;
    for (const auto& l : net.layers) {
        g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            Eigen::VectorXd::Zero(l.bias.size())});
    }
    return g;
}

MlpGradient mlp_backward_td(const MlpNet& net, const PairSample& pair, const TdParams& params) {
    params.validate();
    MlpWorkspace prev(net);
    MlpWorkspace next(net);
    const double yhat_prev = prev.forward(net, to_vector(pair.prev));
    const double yhat_next = next.forward(net, to_vector(pair.next));
    const auto g = td_loss_output_grads(params, pair.y_prev, pair.y_next, yhat_prev, yhat_next);
    MlpGradient grad = zero_gradient(net);
    prev.backward(net, g.g_prev);
    prev.accumulate(grad);
    next.backward(net, g.g_next);
    next.accumulate(grad);
    return grad;
}

MlpGradient mlp_backward_square(const MlpNet& net, const HypercubePoint& x, double y) {
    MlpWorkspace ws(net);
    const double yhat = ws.forward(net, to_vector(x));
    MlpGradient grad = zero_gradient(net);
    ws.backward(net, yhat - y);
    ws.accumulate(grad);
    return grad;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (!(stop_loss >= 0.0)) throw std::invalid_argument("TrainConfig: stop_loss must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("TrainConfig: max_iters must be >= 1");
    if (test_size < 1) throw std::invalid_argument("TrainConfig: test_size must be >= 1");
    TdParams{alpha}.validate();
    if (data == DataKind::Walk) WalkConfig{1, flip_prob, seed}.validate();
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("TrainConfig: hidden sizes must be positive");
    }
}

Eigen::MatrixXd make_test_inputs(int dim, std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed, Stream::TestSet);
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (Eigen::Index r = 0; r < dim; ++r) x(r, c) = rng.sign();
    }
    return x;
}

std::vector<int> mlp_preset(const std::string& name) {
    if (name == "desk") return {64, 64, 32};
    if (name == "paper") return {512, 512, 64};
    if (name == "paper-main") return {512, 1024, 64};
    throw std::invalid_argument("unknown MLP preset '" + name + "'");
}

namespace {

struct Evaluator {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd labels;
    std::vector<Eigen::VectorXd> characters;
    bool boolean = false;

    Evaluator(const BooleanFunction& f, const TrainConfig& cfg)
        : inputs(make_test_inputs(f.dim(), cfg.test_size, cfg.seed)), boolean(f.is_boolean_valued()) {
        labels.resize(inputs.cols());
        for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
            std::vector<std::int8_t> signs(static_cast<std::size_t>(f.dim()));
            for (int r = 0; r < f.dim(); ++r) signs[static_cast<std::size_t>(r)] = static_cast<std::int8_t>(inputs(r, c));
            labels[c] = f.eval(HypercubePoint(std::move(signs)));
        }
        for (const auto& [tag, subset] : cfg.tracked) {
            Eigen::VectorXd chi = Eigen::VectorXd::Ones(inputs.cols());
            for (int coord : subset) {
                if (coord < 1 || coord > f.dim()) throw std::invalid_argument("tracked coefficient outside [d]");
                chi = chi.cwiseProduct(inputs.row(coord - 1).transpose());
            }
            characters.push_back(std::move(chi));
        }
    }

    std::vector<double> operator()(const MlpNet& net) const {
        const Eigen::VectorXd out = mlp_forward_batch(net, inputs);
        const double n = static_cast<double>(out.size());
        std::vector<double> row;
        row.push_back((out - labels).squaredNorm() / n);
        if (boolean) {
            double agree = 0.0;
            for (Eigen::Index i = 0; i < out.size(); ++i) agree += (out[i] >= 0.0) == (labels[i] >= 0.0);
            row.push_back(agree / n);
        } else {
            row.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        for (const auto& chi : characters) row.push_back(out.dot(chi) / n);
        return row;
    }
};

std::vector<std::string> record_columns(const TrainConfig& cfg) {
    std::vector<std::string> cols = {"train_loss", "test_mse", "test_acc"};
    for (const auto& [tag, subset] : cfg.tracked) cols.push_back("coeff_" + tag);
    return cols;
}

}  // namespace

TrainState train_init(const BooleanFunction& f, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<int> dims = {f.dim()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(1);
    TrainState state;
    state.net = mlp_init(dims, cfg.seed);
    if (cfg.data == DataKind::Walk) {
        LazyWalk walk(WalkConfig{f.dim(), cfg.flip_prob, cfg.seed});
        state.current = walk.current();
        state.coord_rng = walk.coord_rng();
        state.flip_rng = walk.flip_rng();
    } else {
        IidSampler sampler(f.dim(), cfg.seed);
        state.current = sampler.next();
        state.iid_rng = sampler.rng();
    }
    state.record = RunRecord(record_columns(cfg));
    return state;
}

void train_continue(const BooleanFunction& f, const TrainConfig& cfg, TrainState& state, const TrainHooks& hooks) {
    cfg.validate();
    if (state.finished) return;
    const Evaluator evaluate(f, cfg);
    const std::uint64_t log_every = cfg.log_every ? cfg.log_every : default_log_interval(cfg.max_iters);
    const std::uint64_t eval_every = cfg.eval_every ? cfg.eval_every : log_every;
    const TdParams td{cfg.loss == LossKind::Td ? cfg.alpha : 0.0};
    const double stop = std::isinf(cfg.stop_loss) ? -1.0 : cfg.stop_loss;

    std::optional<LazyWalk> walk;
    std::optional<IidSampler> iid;
    if (cfg.data == DataKind::Walk) {
        walk.emplace(WalkConfig{f.dim(), cfg.flip_prob, cfg.seed}, state.current, state.walk_steps,
                     state.coord_rng, state.flip_rng);
    } else {
        iid.emplace(f.dim(), state.iid_rng);
    }

    MlpWorkspace ws_prev(state.net);
    MlpWorkspace ws_next(state.net);
    Eigen::VectorXd x_prev = to_vector(state.current);
    double y_prev = f.eval(state.current);
    Eigen::VectorXd x_next;

    while (state.iteration < cfg.max_iters) {
        if (walk) {
            walk->step();
            state.current = walk->current();
        } else {
            state.current = iid->next();
        }
        ++state.iteration;
        x_next = to_vector(state.current);
        const double y_next = f.eval(state.current);

        double loss = 0.0;
        if (cfg.loss == LossKind::Td) {
            const double yhat_prev = ws_prev.forward(state.net, x_prev);
            const double yhat_next = ws_next.forward(state.net, x_next);
            loss = td_loss(td, y_prev, y_next, yhat_prev, yhat_next);
            const auto g = td_loss_output_grads(td, y_prev, y_next, yhat_prev, yhat_next);
            ws_prev.backward(state.net, g.g_prev);
            ws_next.backward(state.net, g.g_next);
            ws_prev.apply(state.net, cfg.lr);
            ws_next.apply(state.net, cfg.lr);
        } else {
            const double yhat = ws_next.forward(state.net, x_next);
            loss = square_loss(y_next, yhat);
            ws_next.backward(state.net, yhat - y_next);
            ws_next.apply(state.net, cfg.lr);
        }
        x_prev.swap(x_next);
        y_prev = y_next;
        state.window_loss += loss;
        ++state.window;

        const bool last = state.iteration == cfg.max_iters;
        if (state.iteration % log_every == 0 || last) {
            const double train_loss = state.window_loss / static_cast<double>(state.window);
            const bool stopping = train_loss < stop;
            if (state.last_eval.empty() || state.iteration % eval_every == 0 || last || stopping) {
                state.last_eval = evaluate(state.net);
            }
            std::vector<double> row = {train_loss};
            row.insert(row.end(), state.last_eval.begin(), state.last_eval.end());
            state.record.append(state.iteration, std::move(row));
            state.window_loss = 0.0;
            state.window = 0;
            if (walk) {
                state.walk_steps = walk->step_count();
                state.coord_rng = walk->coord_rng();
                state.flip_rng = walk->flip_rng();
            } else {
                state.iid_rng = iid->rng();
            }
            if (stopping || last) {
                state.finished = true;
                state.stopped_early = stopping && !last;
            }
            if (hooks.on_log && !hooks.on_log(state)) return;
            if (state.finished) return;
        }
    }
    state.finished = true;
}

TrainResult train_mlp(const BooleanFunction& f, const TrainConfig& cfg, const TrainHooks& hooks) {
    TrainState state = train_init(f, cfg);
    train_continue(f, cfg, state, hooks);
    TrainResult out;
    out.net = std::move(state.net);
    out.record = std::move(state.record);
    out.samples = state.iteration;
    out.stopped_early = state.stopped_early;
    return out;
}

namespace {

nlohmann::json hex_array(const double* data, Eigen::Index n) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < n; ++i) arr.push_back(to_hexfloat(data[i]));
    return arr;
}

void read_hex(const nlohmann::json& arr, double* data, Eigen::Index n) {
    if (static_cast<Eigen::Index>(arr.size()) != n) throw std::invalid_argument("train state: length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) data[i] = parse_double(arr[static_cast<std::size_t>(i)].get<std::string>());
}

nlohmann::json rng_json(const CounterRng& r) { return {{"key", r.key()}, {"counter", r.counter()}}; }
CounterRng rng_from(const nlohmann::json& j) {
    return CounterRng(j.at("key").get<std::uint64_t>(), j.at("counter").get<std::uint64_t>());
}

}  // namespace

std::string save_train_state(const TrainState& s) {
    nlohmann::json j;
    j["format"] = "tdjunta.mlp_state.v1";
    j["layer_dims"] = s.net.layer_dims;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.net.layers) {
        // Column-major, Eigen's storage order.
        layers.push_back({{"weight", hex_array(l.weight.data(), l.weight.size())},
                          {"bias", hex_array(l.bias.data(), l.bias.size())}});
    }
    j["layers"] = layers;
    j["iteration"] = s.iteration;
    std::vector<int> signs(s.current.signs().begin(), s.current.signs().end());
    j["current"] = signs;
    j["walk_steps"] = s.walk_steps;
    j["coord_rng"] = rng_json(s.coord_rng);
    j["flip_rng"] = rng_json(s.flip_rng);
    j["iid_rng"] = rng_json(s.iid_rng);
    j["window_loss"] = to_hexfloat(s.window_loss);
    j["window"] = s.window;
    j["last_eval"] = hex_array(s.last_eval.data(), static_cast<Eigen::Index>(s.last_eval.size()));
    j["columns"] = s.record.columns();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.record.rows()) {
        rows.push_back({{"samples", r.samples},
                        {"values", hex_array(r.values.data(), static_cast<Eigen::Index>(r.values.size()))}});
    }
    j["rows"] = rows;
    j["finished"] = s.finished;
    j["stopped_early"] = s.stopped_early;
    return j.dump();
}

TrainState load_train_state(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.at("format") != "tdjunta.mlp_state.v1") throw std::invalid_argument("train state: unknown format");
    TrainState s;
    s.net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    check_dims(s.net.layer_dims);
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != s.net.layer_dims.size()) throw std::invalid_argument("train state: layer count");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        DenseLayer layer;
        layer.weight.resize(s.net.layer_dims[l + 1], s.net.layer_dims[l]);
        layer.bias.resize(s.net.layer_dims[l + 1]);
        read_hex(layers[l].at("weight"), layer.weight.data(), layer.weight.size());
        read_hex(layers[l].at("bias"), layer.bias.data(), layer.bias.size());
        s.net.layers.push_back(std::move(layer));
    }
    s.iteration = j.at("iteration");
    const auto signs = j.at("current").get<std::vector<int>>();
    s.current = HypercubePoint(std::vector<std::int8_t>(signs.begin(), signs.end()));
    s.walk_steps = j.at("walk_steps");
    s.coord_rng = rng_from(j.at("coord_rng"));
    s.flip_rng = rng_from(j.at("flip_rng"));
    s.iid_rng = rng_from(j.at("iid_rng"));
    s.window_loss = parse_double(j.at("window_loss").get<std::string>());
    s.window = j.at("window");
    s.last_eval.resize(j.at("last_eval").size());
    read_hex(j.at("last_eval"), s.last_eval.data(), static_cast<Eigen::Index>(s.last_eval.size()));
    s.record = RunRecord(j.at("columns").get<std::vector<std::string>>());
    for (const auto& r : j.at("rows")) {
        std::vector<double> values(r.at("values").size());
        read_hex(r.at("values"), values.data(), static_cast<Eigen::Index>(values.size()));
        s.record.append(r.at("samples").get<std::uint64_t>(), std::move(values));
    }
    s.finished = j.at("finished");
    s.stopped_early = j.at("stopped_early");
    return s;
}

}  // namespace tdj
