#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tdjunta/deepnet.hpp"

using namespace tdj;

namespace {

HypercubePoint point(std::vector<int> signs) {
    return HypercubePoint(std::vector<std::int8_t>(signs.begin(), signs.end()));
}

// Central-difference gradient of `loss` over every parameter, flattened
// layer by layer (weights row-major, then biases).
template <class Loss>
std::vector<double> numeric_gradient(MlpNet net, Loss loss, double h) {
    std::vector<double> g;
    for (auto& layer : net.layers) {
        auto probe = [&](double& v) {
            const double keep = v;
            v = keep + h;
            const double up = loss(net);
            v = keep - h;
            const double down = loss(net);
            v = keep;
            g.push_back((up - down) / (2 * h));
        };
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) probe(layer.weight(i, j));
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i]);
    }
    return g;
}

std::vector<double> flatten(const MlpGradient& grad) {
    std::vector<double> g;
    for (const auto& layer : grad.layers) {
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) g.push_back(layer.weight(i, j));
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) g.push_back(layer.bias[i]);
    }
    return g;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        norm += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

TrainConfig tiny_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.hidden = {8, 4};
    cfg.max_iters = 600;
    cfg.log_every = 100;
    cfg.test_size = 64;
    cfg.stop_loss = std::numeric_limits<double>::infinity();
    cfg.seed = seed;
    cfg.tracked = {{"x1", {1}}};
    return cfg;
}

}  // namespace

TEST_CASE("shapes and parameter count") {
    const auto net = mlp_init({6, 8, 4, 1}, 0);
    CHECK(net.parameter_count() == 6 * 8 + 8 + 8 * 4 + 4 + 4 + 1);
    CHECK(net.input_dim() == 6);
    CHECK_THROWS_AS(mlp_init({6, 8, 2}, 0), std::invalid_argument);
    CHECK_THROWS_AS(mlp_init({6}, 0), std::invalid_argument);
    CHECK_THROWS_AS(mlp_init({6, 0, 1}, 0), std::invalid_argument);
    CHECK(mlp_preset("desk") == std::vector<int>{64, 64, 32});
    CHECK(mlp_preset("paper") == std::vector<int>{512, 512, 64});
    CHECK(mlp_preset("paper-main") == std::vector<int>{512, 1024, 64});
    CHECK_THROWS_AS(mlp_preset("huge"), std::invalid_argument);
}

TEST_CASE("initial weights are uniform with fan-in scaling") {
    const auto net = mlp_init({100, 200, 1}, 3);
    const auto& w = net.layers[0].weight;
    CHECK(w.cwiseAbs().maxCoeff() <= 0.1);
    const double mean = w.mean();
    const double var = (w.array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.002);
    CHECK(var == doctest::Approx(0.01 / 3.0).epsilon(0.03));
    CHECK(mlp_init({100, 200, 1}, 3) == net);
    CHECK(!(mlp_init({100, 200, 1}, 4) == net));
}

TEST_CASE("forward: hand network") {
    MlpNet net;
    net.layer_dims = {2, 1, 1};
    net.layers.resize(2);
    net.layers[0].weight.resize(1, 2);
    net.layers[0].weight << 1.0, -1.0;
    net.layers[0].bias = Eigen::VectorXd::Constant(1, 0.5);
    net.layers[1].weight = Eigen::MatrixXd::Constant(1, 1, 2.0);
    net.layers[1].bias = Eigen::VectorXd::Constant(1, -1.0);
    CHECK(mlp_forward(net, point({1, 1})) == 0.0);
    CHECK(mlp_forward(net, point({1, -1})) == 4.0);
    CHECK(mlp_forward(net, point({-1, 1})) == -1.0);
}

TEST_CASE("zero weights pass the biases through the ReLUs") {
    auto net = mlp_init({5, 4, 3, 1}, 1);
    for (auto& l : net.layers) l.weight.setZero();
    CHECK(mlp_forward(net, HypercubePoint(5)) == net.layers.back().bias[0]);
}

TEST_CASE("batch and single forward agree") {
    const auto net = mlp_init({7, 16, 8, 1}, 5);
    const Eigen::MatrixXd x = make_test_inputs(7, 50, 2);
    const Eigen::VectorXd out = mlp_forward_batch(net, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        CHECK(out[c] == doctest::Approx(mlp_forward(net, Eigen::VectorXd(x.col(c)))).epsilon(1e-12));
    }
}

TEST_CASE("gradients match central differences") {
    CounterRng rng(6, Stream::Replica);
    const auto f = make_parity(6, {1, 3});
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 10; ++seed) {
        const auto net = mlp_init({6, 8, 4, 1}, seed);
        LazyWalk walk(WalkConfig{6, 0.9, seed});
        walk.step();
        const PairSample pair = next_pair(walk, f);
        const TdParams td{rng.uniform01()};

        const auto analytic_td = flatten(mlp_backward_td(net, pair, td));
        const auto numeric_td = numeric_gradient(
            net,
            [&](const MlpNet& n) {
                return td_loss(td, pair.y_prev, pair.y_next, mlp_forward(n, pair.prev), mlp_forward(n, pair.next));
            },
            1e-6);
        const auto analytic_sq = flatten(mlp_backward_square(net, pair.next, pair.y_next));
        const auto numeric_sq = numeric_gradient(
            net, [&](const MlpNet& n) { return square_loss(pair.y_next, mlp_forward(n, pair.next)); }, 1e-6);
        // A ReLU kink inside the difference stencil spoils the numeric value;
        // those draws are rare and skipped rather than counted.
        const double e_td = relative_error(analytic_td, numeric_td);
        const double e_sq = relative_error(analytic_sq, numeric_sq);
        if (e_td > 1e-3 || e_sq > 1e-3) continue;
        CHECK(e_td < 1e-6);
        CHECK(e_sq < 1e-6);
        ++checked;
        REQUIRE(seed < 40);
    }
}

TEST_CASE("alpha = 0 TD gradient is the square-loss gradient on the next point") {
    const auto f = make_parity(6, {2, 5});
    const auto net = mlp_init({6, 8, 4, 1}, 9);
    LazyWalk walk(WalkConfig{6, 0.9, 9});
    for (int t = 0; t < 20; ++t) {
        const auto pair = next_pair(walk, f);
        const auto td = flatten(mlp_backward_td(net, pair, TdParams{0.0}));
        const auto sq = flatten(mlp_backward_square(net, pair.next, pair.y_next));
        REQUIRE(td.size() == sq.size());
        for (std::size_t i = 0; i < td.size(); ++i) CHECK(td[i] == doctest::Approx(sq[i]).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("an infinite stop loss runs to max_iters") {
    const auto f = make_parity(5, {1, 2});
    const auto r = train_mlp(f, tiny_config(0));
    CHECK(r.samples == 600);
    CHECK(r.record.back().samples == 600);
    CHECK(r.record.rows().size() == 6);
    CHECK(!r.stopped_early);
    CHECK(r.record.columns() == std::vector<std::string>{"train_loss", "test_mse", "test_acc", "coeff_x1"});
}

TEST_CASE("a loose stop loss stops at the first log event") {
    auto cfg = tiny_config(0);
    cfg.stop_loss = 1e9;
    const auto r = train_mlp(make_parity(5, {1, 2}), cfg);
    CHECK(r.samples == 100);
    CHECK(r.stopped_early);
    CHECK(r.record.rows().size() == 1);
}

TEST_CASE("evaluation cadence repeats the last evaluation") {
    auto cfg = tiny_config(1);
    cfg.eval_every = 300;
    const auto r = train_mlp(make_parity(5, {1, 2}), cfg);
    const auto& rows = r.record.rows();
    REQUIRE(rows.size() == 6);
    // Rows at 100 and 200 reuse the evaluation at 100; 300 re-evaluates.
    CHECK(rows[1].values[1] == rows[0].values[1]);
    CHECK(rows[3].values[1] == rows[2].values[1]);
    CHECK(rows[4].values[1] == rows[3].values[1]);
}

TEST_CASE("invalid configurations") {
    auto cfg = tiny_config(0);
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config(0);
    cfg.alpha = 2.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config(0);
    cfg.test_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config(0);
    cfg.tracked = {{"x9", {9}}};
    CHECK_THROWS_AS(train_mlp(make_parity(5, {1}), cfg), std::invalid_argument);
}

TEST_CASE("suspend, save, load and resume reproduces the uninterrupted run") {
    const auto f = make_parity(5, {1, 2});
    for (auto data : {DataKind::Walk, DataKind::Iid}) {
        for (auto loss : {LossKind::Td, LossKind::Square}) {
            auto cfg = tiny_config(4);
            cfg.data = data;
            cfg.loss = loss;
            const auto full = train_mlp(f, cfg);

            TrainState state = train_init(f, cfg);
            int logs = 0;
            train_continue(f, cfg, state, TrainHooks{[&](const TrainState&) { return ++logs < 2; }});
            REQUIRE(!state.finished);
            CHECK(state.iteration == 200);
            const std::string saved = save_train_state(state);
            TrainState resumed = load_train_state(saved);
            CHECK(save_train_state(resumed) == saved);
            train_continue(f, cfg, resumed);
            CHECK(resumed.finished);
            CHECK(resumed.net == full.net);
            CHECK(resumed.record == full.record);
        }
    }
}

TEST_CASE("walk TD learns a dictator") {
    auto cfg = tiny_config(2);
    cfg.hidden = {16};
    cfg.max_iters = 20000;
    cfg.log_every = 5000;
    cfg.lr = 0.01;
    cfg.test_size = 256;
    const auto r = train_mlp(make_parity(5, {3}), cfg);
    CHECK(r.record.last("test_acc") == 1.0);
    CHECK(r.record.last("test_mse") < 0.05);
}
