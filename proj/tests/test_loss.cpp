#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tdjunta/loss.hpp"
#include "tdjunta/rng.hpp"

using namespace tdj;

TEST_CASE("hand values") {
    CHECK(td_loss(TdParams{1.0}, 1.0, -1.0, 0.0, 0.0) == 2.0);
    CHECK(td_loss(TdParams{0.5}, 1.0, -1.0, 0.0, 0.0) == 1.25);
    CHECK(td_loss(TdParams{0.0}, 1.0, -1.0, 0.0, 0.5) == 1.125);
    CHECK(square_loss(1.0, -1.0) == 2.0);
}

TEST_CASE("alpha outside [0,1] is rejected") {
    CHECK_THROWS_AS(TdParams{1.5}.validate(), std::invalid_argument);
    CHECK_THROWS_AS(TdParams{-0.1}.validate(), std::invalid_argument);
    CHECK_THROWS_AS(TdParams{std::nan("")}.validate(), std::invalid_argument);
    CHECK_NOTHROW(TdParams{0.0}.validate());
    CHECK_NOTHROW(TdParams{1.0}.validate());
}

TEST_CASE("alpha = 0 is the square loss on the next point") {
    CounterRng rng(1, Stream::Replica);
    for (int i = 0; i < 100; ++i) {
        const double yp = rng.normal(), yn = rng.normal(), hp = rng.normal(), hn = rng.normal();
        CHECK(td_loss(TdParams{0.0}, yp, yn, hp, hn) == doctest::Approx(square_loss(yn, hn)).epsilon(1e-15));
    }
}

TEST_CASE("pure TD loss ignores a common shift of the predictions") {
    CounterRng rng(2, Stream::Replica);
    for (int i = 0; i < 100; ++i) {
        const double yp = rng.normal(), yn = rng.normal(), hp = rng.normal(), hn = rng.normal();
        const double c = 10.0 * rng.normal();
        CHECK(td_loss(TdParams{1.0}, yp, yn, hp + c, hn + c) ==
              doctest::Approx(td_loss(TdParams{1.0}, yp, yn, hp, hn)).epsilon(1e-9));
    }
}

TEST_CASE("output gradients match central differences") {
    CounterRng rng(3, Stream::Replica);
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
        const TdParams p{rng.uniform01()};
        const double yp = rng.sign(), yn = rng.sign(), hp = rng.normal(), hn = rng.normal();
        const auto g = td_loss_output_grads(p, yp, yn, hp, hn);
        const double fd_prev = (td_loss(p, yp, yn, hp + h, hn) - td_loss(p, yp, yn, hp - h, hn)) / (2 * h);
        const double fd_next = (td_loss(p, yp, yn, hp, hn + h) - td_loss(p, yp, yn, hp, hn - h)) / (2 * h);
        CHECK(g.g_prev == doctest::Approx(fd_prev).epsilon(1e-7).scale(1.0));
        CHECK(g.g_next == doctest::Approx(fd_next).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("Hessian in the predictions is positive semidefinite") {
    for (double alpha : {0.0, 0.3, 0.9, 1.0}) {
        const TdParams p{alpha};
        const double h = 1e-3;
        // The loss is quadratic, so one-sided differences of the gradient are exact.
        const auto g0 = td_loss_output_grads(p, 1, -1, 0.2, -0.4);
        const auto gp = td_loss_output_grads(p, 1, -1, 0.2 + h, -0.4);
        const auto gn = td_loss_output_grads(p, 1, -1, 0.2, -0.4 + h);
        const double hpp = (gp.g_prev - g0.g_prev) / h;
        const double hpn = (gn.g_prev - g0.g_prev) / h;
        const double hnp = (gp.g_next - g0.g_next) / h;
        const double hnn = (gn.g_next - g0.g_next) / h;
        CHECK(hpn == doctest::Approx(hnp));
        CHECK(hpp == doctest::Approx(alpha).scale(1.0));
        CHECK(hnn == doctest::Approx(1.0).scale(1.0));
        const double tr = hpp + hnn;
        const double det = hpp * hnn - hpn * hnp;
        CHECK(tr >= -1e-9);
        CHECK(det >= -1e-9);
    }
}
