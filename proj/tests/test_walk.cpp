#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <bit>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "tdjunta/boolfn.hpp"
#include "tdjunta/walk.hpp"

using namespace tdj;

namespace {

// Pearson statistic of observed counts against expected probabilities.
double chi_square(const std::vector<double>& counts, const std::vector<double>& probs, double n) {
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        stat += (counts[i] - e) * (counts[i] - e) / e;
    }
    return stat;
}

std::uint32_t pattern_of(const HypercubePoint& x) {
    std::uint32_t p = 0;
    for (int i = 1; i <= x.dim(); ++i) p = (p << 1) | (x(i) > 0 ? 1u : 0u);
    return p;
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(WalkConfig({0, 0.5, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(WalkConfig({5, 0.0, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(WalkConfig({5, 1.0, 0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(WalkConfig({5, 0.5, 0}).validate());
}

TEST_CASE("initial point is uniform over seeds") {
    const int d = 3;
    const std::size_t n = 16000;
    std::vector<double> counts(8, 0.0);
    for (std::uint64_t s = 0; s < n; ++s) counts[pattern_of(LazyWalk(WalkConfig{d, 0.5, s}).current())] += 1.0;
    // 7 degrees of freedom, upper 0.1% point 24.3.
    CHECK(chi_square(counts, std::vector<double>(8, 1.0 / 8), static_cast<double>(n)) < 24.3);
}

TEST_CASE("lazy steps move at most one coordinate") {
    const double p = 0.3;
    LazyWalk walk(WalkConfig{20, p, 4});
    std::size_t flips = 0;
    std::vector<double> coord_counts(20, 0.0);
    const std::size_t n = 100000;
    for (std::size_t t = 0; t < n; ++t) {
        const HypercubePoint before = walk.current();
        const WalkMove m = walk.step();
        REQUIRE(m.coord >= 1);
        REQUIRE(m.coord <= 20);
        const int h = hamming(before, walk.current());
        REQUIRE(h == (m.flipped ? 1 : 0));
        if (m.flipped) REQUIRE(before(m.coord) == -walk.current()(m.coord));
        flips += m.flipped;
        coord_counts[static_cast<std::size_t>(m.coord - 1)] += 1.0;
    }
    CHECK(walk.step_count() == n);
    const double sd = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(flips) / n - p) < 4 * sd);
    // 19 degrees of freedom, upper 0.1% point 43.8.
    CHECK(chi_square(coord_counts, std::vector<double>(20, 1.0 / 20), static_cast<double>(n)) < 43.8);
}

TEST_CASE("walks are reproducible and copies continue the same sequence") {
    LazyWalk a(WalkConfig{10, 0.5, 99});
    LazyWalk b(WalkConfig{10, 0.5, 99});
    for (int t = 0; t < 50; ++t) a.step(), b.step();
    CHECK(a == b);
    LazyWalk c = a;
    for (int t = 0; t < 50; ++t) CHECK(a.step().coord == c.step().coord);
    CHECK(a.current() == c.current());

    LazyWalk restored(a.config(), a.current(), a.step_count(), a.coord_rng(), a.flip_rng());
    for (int t = 0; t < 50; ++t) a.step(), restored.step();
    CHECK(a.current() == restored.current());
    CHECK(a.step_count() == restored.step_count());
}

TEST_CASE("pair stream overlaps and carries exact labels") {
    const auto f = make_parity(12, {2, 7});
    LazyWalk walk(WalkConfig{12, 0.9, 3});
    const auto pairs = pair_stream(walk, f, 500);
    REQUIRE(pairs.size() == 500);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].y_prev == f.eval(pairs[i].prev));
        CHECK(pairs[i].y_next == f.eval(pairs[i].next));
        CHECK(hamming(pairs[i].prev, pairs[i].next) <= 1);
        if (i + 1 < pairs.size()) CHECK(pairs[i].next == pairs[i + 1].prev);
    }
}

TEST_CASE("i.i.d. points are independent of each other") {
    const int d = 50;
    IidSampler s(d, 8);
    HypercubePoint prev = s.next();
    double total = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        HypercubePoint x = s.next();
        total += hamming(prev, x);
        prev = std::move(x);
    }
    const double mean = total / n;
    CHECK(mean >= 24.5);
    CHECK(mean <= 25.5);

    const auto f = make_parity(d, {1});
    const auto stream = iid_stream(d, 8, f, 10);
    for (const auto& [x, y] : stream) CHECK(y == x(1));
    CHECK_THROWS_AS(iid_stream(d + 1, 8, f, 1), std::invalid_argument);
}

TEST_CASE("spectral gap") {
    CHECK(spectral_gap(50, 0.9) == doctest::Approx(0.036));
    CHECK_THROWS_AS(spectral_gap(0, 0.5), std::invalid_argument);
}

TEST_CASE("kernel spectrum is 1 - 2p|S|/d") {
    for (auto [k, d, p] : {std::tuple{4, 4, 0.25}, std::tuple{3, 7, 0.9}, std::tuple{5, 5, 0.5}}) {
        const Eigen::MatrixXd K = projected_chain_kernel(k, d, p);
        for (Eigen::Index r = 0; r < K.rows(); ++r) CHECK(K.row(r).sum() == doctest::Approx(1.0));
        CHECK((K - K.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
        std::vector<double> got(es.eigenvalues().data(), es.eigenvalues().data() + K.rows());
        std::vector<double> want;
        for (std::uint32_t s = 0; s < (1u << k); ++s) want.push_back(1.0 - 2.0 * p * std::popcount(s) / d);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    // Full chain on 16 states: second eigenvalue 1 - 2 (0.25) / 4.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(projected_chain_kernel(4, 4, 0.25));
    CHECK(es.eigenvalues()(14) == doctest::Approx(0.875));
    CHECK_THROWS_AS(projected_chain_kernel(13, 20, 0.5), std::length_error);
    CHECK_THROWS_AS(projected_chain_kernel(5, 4, 0.5), std::invalid_argument);
}

TEST_CASE("edge chain visits edges at their stationary rates") {
    const int k = 2;
    const double p = 0.5;
    const std::size_t n = 200000;
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> counts;
    EdgeWalk walk(k, p, 21);
    std::uint32_t last = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto e = walk.next();
        if (t > 0) REQUIRE(e.first == last);
        REQUIRE(std::popcount(e.first ^ e.second) <= 1);
        last = e.second;
        counts[e] += 1.0;
    }
    std::vector<double> obs;
    std::vector<double> probs;
    for (std::uint32_t u = 0; u < 4; ++u) {
        obs.push_back(counts[{u, u}]);
        probs.push_back(0.25 * (1 - p));
        for (int j = 0; j < k; ++j) {
            obs.push_back(counts[{u, u ^ (1u << j)}]);
            probs.push_back(0.25 * p / k);
        }
    }
    // 11 degrees of freedom, upper 0.1% point 31.3. Successive edges are
    // dependent, so the statistic is only a rough check; the chain mixes fast.
    CHECK(chi_square(obs, probs, static_cast<double>(n)) < 31.3);
}

TEST_CASE("trajectory dump matches the stored golden file") {
    const auto f = make_parity(8, {1, 4});
    std::ostringstream out;
    write_trajectory_csv(out, WalkConfig{8, 0.5, 7}, f, 40);
    std::ifstream in(std::string(TDJ_TEST_DATA) + "/trajectory_d8_p0.5_s7.csv", std::ios::binary);
    REQUIRE(in);
    std::ostringstream golden;
    golden << in.rdbuf();
    CHECK(out.str() == golden.str());

    // Rows replay consistently: y changes only on a flip of a support coordinate.
    std::istringstream rows(out.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line == "# lazy_walk dim=8 flip_prob=0.5 seed=7");
    std::getline(rows, line);
    CHECK(line == "step,j_t,Z_t,y_t");
    int prev_y = 0;
    int count = 0;
    while (std::getline(rows, line)) {
        int step = 0, j = 0, z = 0, y = 0;
        char c = 0;
        std::istringstream(line) >> step >> c >> j >> c >> z >> c >> y;
        CHECK(step == count);
        if (step > 0) CHECK((y != prev_y) == (z == 1 && (j == 1 || j == 4)));
        prev_y = y;
        ++count;
    }
    CHECK(count == 41);
}
