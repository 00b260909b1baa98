#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tdjunta/shallow.hpp"

using namespace tdj;

namespace {

HypercubePoint point(std::vector<int> signs) {
    return HypercubePoint(std::vector<std::int8_t>(signs.begin(), signs.end()));
}

PairSample make_pair(const BooleanFunction& f, const HypercubePoint& prev, const HypercubePoint& next) {
    PairSample s;
    s.prev = prev;
    s.next = next;
    s.y_prev = f.eval(prev);
    s.y_next = f.eval(next);
    return s;
}

TwoLayerNet random_net(int n, int d, std::uint64_t seed) {
    CounterRng rng(seed, Stream::Replica);
    TwoLayerNet net;
    net.w.resize(n, d);
    net.a.resize(n);
    net.b.resize(n);
    for (Eigen::Index i = 0; i < net.w.size(); ++i) net.w.data()[i] = rng.normal();
    for (int i = 0; i < n; ++i) net.a[i] = rng.normal(), net.b[i] = rng.normal();
    return net;
}

}  // namespace

TEST_CASE("initial network outputs kappa everywhere") {
    const auto net = init_algorithm1(400, 30, 0.001);
    CHECK(net.w.isZero(0.0));
    CounterRng rng(0, Stream::Replica);
    for (int i = 0; i < 10; ++i) CHECK(forward(net, uniform_point(30, rng)) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK_THROWS_AS(init_algorithm1(0, 3, 1.0), std::invalid_argument);
}

TEST_CASE("forward agrees with an explicit sum") {
    const auto net = random_net(7, 5, 9);
    CounterRng rng(1, Stream::Replica);
    for (int t = 0; t < 20; ++t) {
        const HypercubePoint x = uniform_point(5, rng);
        double want = 0.0;
        for (int i = 0; i < 7; ++i) {
            double pre = net.b[i];
            for (int j = 0; j < 5; ++j) pre += net.w(i, j) * x(j + 1);
            want += net.a[i] * std::max(0.0, pre);
        }
        CHECK(forward(net, x) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(forward(net, HypercubePoint(4)), std::invalid_argument);
}

TEST_CASE("phase 1 learning rate") {
    CHECK(theorem_phase1_lr(2, 8, 1.0, 4) == doctest::Approx(std::sqrt(8.0)));
    CHECK(theorem_phase1_lr(7680, 30, 0.001, 3) == doctest::Approx(std::sqrt(2.0 * 7680 * 30) / (0.001 * std::sqrt(3.0))));
}

TEST_CASE("closed-form first step: hand cases") {
    const auto f = make_parity(3, {1, 2});

    SUBCASE("single flip of a support coordinate") {
        const std::vector<PairSample> pairs = {make_pair(f, point({1, 1, 1}), point({-1, 1, 1}))};
        const Phase1Config cfg{1, 1.0, 1.0, 1};
        const Eigen::VectorXd u = phase1_closed_form_update(f, pairs, cfg);
        CHECK(u(0) == 4.0);
        CHECK(u(1) == 0.0);
        CHECK(u(2) == 0.0);
        const Eigen::MatrixXd g = phase1_autograd_update(init_algorithm1(3, 3, 1.0), pairs, cfg);
        for (int i = 0; i < 3; ++i) CHECK((g.row(i).transpose() - u).norm() == 0.0);
    }

    SUBCASE("a flip followed by a lazy step") {
        const std::vector<PairSample> pairs = {make_pair(f, point({1, 1, 1}), point({1, -1, 1})),
                                               make_pair(f, point({1, -1, 1}), point({1, -1, 1}))};
        const Phase1Config cfg{2, 2.0, 0.5, 1};
        const Eigen::VectorXd u = phase1_closed_form_update(f, pairs, cfg);
        CHECK(u(0) == 0.0);
        CHECK(u(1) == 2.0);
        CHECK(u(2) == 0.0);
        const Eigen::MatrixXd g = phase1_autograd_update(init_algorithm1(2, 3, 0.5), pairs, cfg);
        CHECK((g.row(1).transpose() - u).norm() == doctest::Approx(0.0));
    }

    SUBCASE("off-support flips and lazy steps contribute nothing") {
        const std::vector<PairSample> pairs = {make_pair(f, point({1, 1, 1}), point({1, 1, -1})),
                                               make_pair(f, point({1, 1, -1}), point({1, 1, -1}))};
        const Phase1Config cfg{2, 1.0, 1.0, 1};
        CHECK(phase1_closed_form_update(f, pairs, cfg).isZero(0.0));
        CHECK(phase1_autograd_update(init_algorithm1(4, 3, 1.0), pairs, cfg).isZero(0.0));
    }

    SUBCASE("broken trajectories and wrong batch sizes are rejected") {
        const std::vector<PairSample> pairs = {make_pair(f, point({1, 1, 1}), point({-1, 1, 1})),
                                               make_pair(f, point({1, 1, 1}), point({1, 1, 1}))};
        CHECK_THROWS_AS(phase1_closed_form_update(f, pairs, Phase1Config{2, 1.0, 1.0, 1}), std::invalid_argument);
        CHECK_THROWS_AS(phase1_closed_form_update(f, std::span(pairs).first(1), Phase1Config{2, 1.0, 1.0, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("autograd and closed form agree on a long walk at init") {
    const auto f = make_parity(12, {3, 5, 11});
    LazyWalk walk(WalkConfig{12, 0.9, 5});
    const auto pairs = pair_stream(walk, f, 300);
    const Phase1Config cfg{300, theorem_phase1_lr(300, 12, 0.01, 3), 0.01, 1};
    const Eigen::VectorXd u = phase1_closed_form_update(f, pairs, cfg);
    const Eigen::MatrixXd g = phase1_autograd_update(init_algorithm1(5, 12, 0.01), pairs, cfg);
    for (int j = 1; j <= 12; ++j) {
        if (j != 3 && j != 5 && j != 11) CHECK(u(j - 1) == 0.0);
    }
    for (int i = 0; i < 5; ++i) CHECK((g.row(i).transpose() - u).norm() <= 1e-9 * (1.0 + u.norm()));
}

TEST_CASE("non-degeneracy margin") {
    const auto f = make_parity(3, {1, 2});

    SUBCASE("powers of two separate every pattern") {
        Eigen::VectorXd w(3);
        w << 1.0, 2.0, 0.0;
        const auto r = check_nondegeneracy(w, f, 1.0);
        CHECK(r.min_margin == 2.0);
        CHECK(r.passed());
        CHECK(!check_nondegeneracy(w, f, 2.0).passed());
    }

    SUBCASE("zero weights cannot separate anything") {
        const auto r = check_nondegeneracy(Eigen::VectorXd::Zero(3), f, 0.0);
        CHECK(r.min_margin == 0.0);
        REQUIRE(r.violating_pair.has_value());
        CHECK(f.eval_pattern(r.violating_pair->first) != f.eval_pattern(r.violating_pair->second));
    }

    SUBCASE("one relevant coordinate") {
        Eigen::VectorXd w(4);
        w << 0.0, 0.3, 5.0, -1.0;
        const auto r = check_nondegeneracy(w, make_parity(4, {2}), 0.5);
        CHECK(r.min_margin == doctest::Approx(0.6));
        CHECK(r.passed());
    }

    SUBCASE("equal-valued patterns may collide") {
        // Only x1 matters; x2 is declared but carries no weight.
        const std::vector<double> table = {-1.0, -1.0, 1.0, 1.0};
        const auto g = make_junta_from_table(2, {1, 2}, table);
        Eigen::VectorXd w(2);
        w << 1.0, 0.0;
        CHECK(check_nondegeneracy(w, g, 1.0).min_margin == 2.0);
    }

    SUBCASE("constant functions have no distinguishing pair") {
        const std::vector<double> table = {1.0, 1.0};
        const auto r = check_nondegeneracy(Eigen::VectorXd::Zero(2), make_junta_from_table(2, {1}, table), 0.0);
        CHECK(std::isinf(r.min_margin));
        CHECK(r.passed());
    }

    SUBCASE("brute force agrees on random rows") {
        CounterRng rng(4, Stream::Replica);
        const auto h = make_parity(6, {1, 2, 4, 6});
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd w(6);
            for (int j = 0; j < 6; ++j) w[j] = std::round(4.0 * rng.normal());
            double want = std::numeric_limits<double>::infinity();
            const auto& s = h.support();
            for (std::uint64_t a = 0; a < 16; ++a) {
                for (std::uint64_t b = 0; b < 16; ++b) {
                    if (h.eval_pattern(a) == h.eval_pattern(b)) continue;
                    double proj = 0.0;
                    for (int m = 0; m < 4; ++m) {
                        const int bit = 3 - m;
                        proj += w[s[m] - 1] * ((((a >> bit) & 1) ? 1.0 : -1.0) - (((b >> bit) & 1) ? 1.0 : -1.0));
                    }
                    want = std::min(want, std::abs(proj));
                }
            }
            CHECK(check_nondegeneracy(w, h, 0.5).min_margin == doctest::Approx(want));
        }
    }
}

TEST_CASE("bias redraw is uniform on [-A, A] and leaves weights alone") {
    const auto base = random_net(4000, 3, 2);
    const auto net = redraw_biases(base, 2.5, 17);
    CHECK(net.w == base.w);
    CHECK(net.a == base.a);
    std::vector<double> u(net.b.data(), net.b.data() + net.b.size());
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    const double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        REQUIRE(std::abs(u[i]) <= 2.5);
        const double cdf = (u[i] + 2.5) / 5.0;
        ks = std::max({ks, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
    }
    // 1% critical value of the one-sample KS statistic.
    CHECK(ks < 1.63 / std::sqrt(n));
    CHECK(redraw_biases(base, 2.5, 17) == net);
    CHECK_THROWS_AS(redraw_biases(base, 0.0, 1), std::invalid_argument);
}

TEST_CASE("certificate") {
    SUBCASE("constant features cannot express a parity") {
        auto net = init_algorithm1(5, 3, 1.0);
        const auto r = certificate_solve(net, make_parity(3, {1, 2}));
        CHECK(r.residual == doctest::Approx(1.0));
    }
    SUBCASE("constant target from positive biases") {
        auto net = init_algorithm1(5, 3, 1.0);
        const std::vector<double> table = {0.7, 0.7};
        const auto r = certificate_solve(net, make_junta_from_table(3, {2}, table));
        CHECK(r.residual < 1e-12);
        // Minimal norm: equal weights summing to 0.7 / (1/5).
        for (int i = 0; i < 5; ++i) CHECK(r.a_star[i] == doctest::Approx(0.7));
    }
    SUBCASE("separating features reproduce a parity exactly") {
        TwoLayerNet net;
        net.w = Eigen::MatrixXd::Zero(40, 4);
        net.w.col(0).setConstant(1.0);
        net.w.col(2).setConstant(2.0);
        net.a = Eigen::VectorXd::Zero(40);
        net.b = Eigen::VectorXd::Zero(40);
        net = redraw_biases(net, 3.5, 3);
        const auto f = make_parity(4, {1, 3});
        const auto r = certificate_solve(net, f);
        CHECK(r.residual < 1e-9);
        net.a = r.a_star;
        CHECK(exact_uniform_mse(net, f) < 1e-18);
    }
}

TEST_CASE("phase 2 step") {
    TwoLayerNet net;
    net.w = Eigen::MatrixXd::Zero(1, 1);
    net.a = Eigen::VectorXd::Zero(1);
    net.b = Eigen::VectorXd::Constant(1, 1.0);
    phase2_sgd_step(net, HypercubePoint(1), 1.0, 0.2, 0.0);
    CHECK(net.a[0] == doctest::Approx(0.2));
    // Ridge shrinks: a <- a - lr ((a - y) + lambda a) = 0.2 - 0.5 (0.2 - 1 + 0.2).
    phase2_sgd_step(net, HypercubePoint(1), 1.0, 0.5, 1.0);
    CHECK(net.a[0] == doctest::Approx(0.5));
}

TEST_CASE("mixing-time bound") {
    CHECK(projected_mixing_time(10, 2, 0.5) == doctest::Approx(10.0 * 5.0 * std::log(2.0)));
}

TEST_CASE("algorithm 1 on a constant target") {
    const std::vector<double> table = {0.5, 0.5, 0.5, 0.5};
    const auto f = make_junta_from_table(8, {2, 5}, table);
    Algorithm1Config cfg;
    cfg.walk = WalkConfig{8, 0.5, 0};
    cfg.n_hidden = 50;
    cfg.phase1 = Phase1Config{64, theorem_phase1_lr(64, 8, 0.001, 2), 0.001, 1};
    cfg.phase2.steps = 3000;
    cfg.theorem_delta = 0.05;
    const auto r = run_algorithm1(f, cfg, 3);
    CHECK(r.phase1_row.isZero(0.0));
    CHECK(r.net.w.isZero(0.0));
    CHECK(r.bias_range == doctest::Approx(r.margin_epsilon));
    REQUIRE(r.theory.has_value());
    CHECK(r.phase2_lr <= 1.0 / r.theory->m_lambda);
    // Every hidden unit sees the same input, so Phase II converges to the
    // ridge solution y q / (q + lambda) with q = |Phi|^2.
    const double q = hidden_features(r.net, HypercubePoint(8)).squaredNorm();
    const double shrink = 0.5 * r.phase2_ridge / (q + r.phase2_ridge);
    CHECK(r.record.last("test_mse") == doctest::Approx(shrink * shrink).epsilon(1e-6));
    CHECK(r.record.last("test_mse") < 0.05);
    CHECK(r.record.back().samples == 64 + 3000);
}

TEST_CASE("algorithm 1 is reproducible") {
    const auto f = make_parity(10, {2, 9});
    Algorithm1Config cfg;
    cfg.walk = WalkConfig{10, 0.5, 4};
    cfg.n_hidden = 30;
    cfg.phase1 = Phase1Config{5120, theorem_phase1_lr(5120, 10, 0.001, 2), 0.001, 1};
    cfg.phase2.steps = 500;
    cfg.theorem_delta = 0.05;
    const auto a = run_algorithm1(f, cfg, 1);
    const auto b = run_algorithm1(f, cfg, 1);
    CHECK(a.net == b.net);
    CHECK(a.record == b.record);
    for (int j = 1; j <= 10; ++j) {
        if (j != 2 && j != 9) CHECK(a.phase1_row[j - 1] == 0.0);
    }
    cfg.walk.dim = 9;
    CHECK_THROWS_AS(run_algorithm1(f, cfg, 1), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto net = random_net(6, 4, 12);
    const auto cp = load_checkpoint(save_checkpoint(net, "phase2", 1234, 77));
    CHECK(cp.net == net);
    CHECK(cp.phase == "phase2");
    CHECK(cp.step == 1234);
    CHECK(cp.seed == 77);
    CHECK_THROWS(load_checkpoint(R"({"format":"other"})"));
}
