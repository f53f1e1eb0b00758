#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "featadmm/inner.hpp"

#include <cmath>
#include <random>

using namespace featadmm;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

std::vector<FunctionSpec> f_kinds() {
    return {FunctionSpec::squared_l2_loss(), FunctionSpec::abs_l1_loss(), FunctionSpec::squared_l2_reg(0.6),
            FunctionSpec::l1_reg(0.8), FunctionSpec::elastic_net(0.5, 1.5)};
}

// Per-agent loss written out independently of the library: f(N e) / N.
double h(const FunctionSpec& f, const Vector& e, int n) { return f.value(static_cast<double>(n) * e) / n; }

// Zooming grid search for a convex function of one variable.
template <class Fn>
double zoom_min(Fn&& fn, double lo, double hi) {
    for (int level = 0; level < 60 && hi - lo > 1e-12; ++level) {
        const int pts = 400;
        const double step = (hi - lo) / pts;
        double best_x = lo, best = INFINITY;
        for (int k = 0; k <= pts; ++k) {
            const double x = lo + k * step;
            const double v = fn(x);
            if (v < best) {
                best = v;
                best_x = x;
            }
        }
        lo = best_x - 2 * step;
        hi = best_x + 2 * step;
    }
    return 0.5 * (lo + hi);
}

// The beta objective is a sum over coordinates for every kind, so each
// coordinate is searched on its own.
Vector brute_beta(const FunctionSpec& f, const Vector& q, double rho_bar, int n) {
    Vector beta(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        auto obj = [&](double b) {
            Vector e = vec({q(i) - b});
            return b * b / (4 * rho_bar) + h(f, e, n);
        };
        const double r = 10.0 + 2.0 * std::abs(q(i));
        beta(i) = zoom_min(obj, -r, r);
    }
    return beta;
}

BcdConfig tight() {
    BcdConfig cfg;
    cfg.theta_budget = 200000;
    cfg.theta_tolerance = 1e-14;
    return cfg;
}

} // namespace

TEST_CASE("beta update examples") {
    for (const auto& f : f_kinds()) CHECK(beta_update(f, Vector::Zero(3), 1.7, 4).norm() == 0.0);

    const Vector b1 = beta_update(FunctionSpec::squared_l2_loss(), vec({1, 0}), 2.0, 2);
    CHECK(b1(0) == doctest::Approx(16.0 / 17.0).epsilon(1e-14));
    CHECK(b1(1) == 0.0);
    const Vector g1 = brute_beta(FunctionSpec::squared_l2_loss(), vec({1, 0}), 2.0, 2);
    CHECK(std::abs(g1(0) - 0.9411764705882353) <= 1e-6);

    const Vector b2 = beta_update(FunctionSpec::abs_l1_loss(), vec({5}), 1.0, 1);
    CHECK(b2(0) == doctest::Approx(2.0));
    CHECK(std::abs(brute_beta(FunctionSpec::abs_l1_loss(), vec({5}), 1.0, 1)(0) - 2.0) <= 1e-6);

    // squared loss: beta = 4 N rho_bar / (1 + 4 N rho_bar) q
    const Vector q = vec({0.3, -1.1, 2.0});
    CHECK((beta_update(FunctionSpec::squared_l2_loss(), q, 1.5, 3) - (18.0 / 19.0) * q).norm() <= 1e-14);
    CHECK_THROWS(beta_update(FunctionSpec::squared_l2_loss(), q, 0.0, 3));
}

TEST_CASE("beta update matches brute force on small instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> msize(1, 3), nagents(1, 12);
    std::uniform_real_distribution<double> rb(0.1, 8.0), qv(-4.0, 4.0);
    for (const auto& f : f_kinds()) {
        for (int t = 0; t < 50; ++t) {
            const int m = msize(rng), n = nagents(rng);
            const double rho_bar = rb(rng);
            Vector q(m);
            for (auto& x : q) x = qv(rng);
            const Vector exact = beta_update(f, q, rho_bar, n);
            const Vector brute = brute_beta(f, q, rho_bar, n);
            CHECK((exact - brute).cwiseAbs().maxCoeff() <= 1e-6);
        }
    }
}

TEST_CASE("theta update examples") {
    BcdConfig cfg = tight();
    SUBCASE("zero block") {
        LocalBlock blk(Matrix::Zero(4, 2));
        auto res = theta_update(FunctionSpec::squared_l2_loss(), FunctionSpec::elastic_net(1, 1), blk,
                                vec({1, 2, 3, 4}), 3, vec({0.5, -0.5}), cfg);
        CHECK(res.theta.norm() == 0.0);
    }
    SUBCASE("1x1 ridge: theta = 0.5") {
        LocalBlock blk(Matrix::Ones(1, 1));
        auto res = theta_update(FunctionSpec::squared_l2_loss(), FunctionSpec::squared_l2_reg(1.0), blk, vec({1}), 1,
                                vec({0}), cfg);
        CHECK(res.theta(0) == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(res.converged);
        auto again = theta_update(FunctionSpec::squared_l2_loss(), FunctionSpec::squared_l2_reg(1.0), blk, vec({1}),
                                  1, vec({0.5}), cfg);
        CHECK(std::abs(again.theta(0) - 0.5) <= cfg.theta_tolerance);
        CHECK(again.iterations == 1);
    }
}

TEST_CASE("theta update matches the normal equations") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        const int m = 6 + t % 5, p = 1 + t % 3, n = 1 + t % 7;
        const double eta = 0.05 + 0.1 * t;
        Matrix a(m, p);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        Vector qp(m);
        for (auto& x : qp) x = g(rng);
        LocalBlock blk(a);
        auto res = theta_update(FunctionSpec::squared_l2_loss(), FunctionSpec::squared_l2_reg(eta), blk, qp, n,
                                Vector::Zero(p), tight());
        const Matrix lhs = eta * Matrix::Identity(p, p) + n * a.transpose() * a;
        const Vector phi = -lhs.ldlt().solve(n * a.transpose() * qp);
        CHECK((res.theta + phi).norm() <= 1e-6 * std::max(1.0, phi.norm()));
    }
}

TEST_CASE("theta update with l1 regularizer satisfies the stationarity inclusion") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        const int m = 8, p = 3, n = 1 + t % 5;
        Matrix a(m, p);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        Vector qp(m);
        for (auto& x : qp) x = g(rng);
        const auto r = t % 2 ? FunctionSpec::l1_reg(0.5 + t) : FunctionSpec::elastic_net(1.0, 1.0);
        const auto f = FunctionSpec::squared_l2_loss();
        auto res = theta_update(f, r, LocalBlock(a), qp, n, Vector::Zero(p), tight());
        const Vector phi = -res.theta;
        const Vector grad = n * a.transpose() * f.gradient(qp + a * phi);
        CHECK(r.subdifferential_distance(phi, -grad) <= 1e-5);
    }
}

TEST_CASE("substitution consistency on a grid") {
    // Direct evaluation of r(-theta) + h(q' - A theta) over a grid in theta.
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    for (const auto& r : {FunctionSpec::l1_reg(0.7), FunctionSpec::elastic_net(0.3, 0.4)}) {
        Matrix a(5, 2);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        Vector qp(5);
        for (auto& x : qp) x = g(rng);
        const auto f = FunctionSpec::squared_l2_loss();
        const int n = 3;
        auto obj = [&](const Vector& th) { return r.value(-th) + h(f, qp - a * th, n); };
        auto res = theta_update(f, r, LocalBlock(a), qp, n, Vector::Zero(2), tight());
        double grid_best = INFINITY;
        for (int i = -300; i <= 300; ++i)
            for (int j = -300; j <= 300; ++j) grid_best = std::min(grid_best, obj(vec({i * 0.01, j * 0.01})));
        CHECK(obj(res.theta) <= grid_best + 1e-12);
    }
}

TEST_CASE("subgradient path never increases the objective") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    Matrix a(10, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Vector qp(10);
    for (auto& x : qp) x = g(rng);
    const auto f = FunctionSpec::abs_l1_loss();
    const auto r = FunctionSpec::squared_l2_reg(0.01);
    const Vector init = vec({0.3, -0.2});
    auto obj = [&](const Vector& th) { return r.value(-th) + h(f, qp - a * th, 4); };
    BcdConfig cfg;
    auto res = theta_update(f, r, LocalBlock(a), qp, 4, init, cfg);
    CHECK(obj(res.theta) <= obj(init));
    // the diminishing rule is also usable for smooth losses
    cfg.step_rule = StepRule::diminishing_subgradient;
    auto res2 = theta_update(FunctionSpec::squared_l2_loss(), r, LocalBlock(a), qp, 4, init, cfg);
    auto obj2 = [&](const Vector& th) { return r.value(-th) + h(FunctionSpec::squared_l2_loss(), qp - a * th, 4); };
    CHECK(obj2(res2.theta) <= obj2(init));
}

TEST_CASE("delta value") {
    const auto f = FunctionSpec::squared_l2_loss();
    const auto r = FunctionSpec::squared_l2_reg(1.0);
    // all-zero arguments: -N f(-b/N) for the squared loss
    const Vector b = vec({1, 2});
    CHECK(delta_value(f, r, Vector::Zero(2), Matrix::Zero(2, 1), b, 2, 1.0, Vector::Zero(1), Vector::Zero(2)) ==
          doctest::Approx(-2.5));
    // hand evaluation: w = (-2.5, -1), r = 0.25, ||beta||^2/4 = 0.5, h = 2 * 7.25
    Matrix a(2, 1);
    a << 1, 2;
    CHECK(delta_value(f, r, vec({1, 0}), a, vec({0, 2}), 2, 1.0, vec({0.5}), vec({1, -1})) ==
          doctest::Approx(-15.25).epsilon(1e-14));
}

TEST_CASE("bcd sweeps") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Matrix a(7, 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Vector b(7), c(7);
    for (auto& x : b) x = g(rng);
    for (auto& x : c) x = g(rng);
    const LocalBlock blk(a);
    const auto f = FunctionSpec::squared_l2_loss();
    const auto r = FunctionSpec::elastic_net(1, 1);
    const int n = 5;
    const double rho_bar = 6.0;
    BcdConfig cfg;
    const BcdState warm{vec({0.1, 0.2}), Vector::Zero(7)};

    SUBCASE("T = 1 is one theta update then one beta update") {
        cfg.sweeps = 1;
        auto res = bcd_solve(f, r, blk, c, b, n, rho_bar, warm, cfg);
        const Vector base = -c - b / n;
        auto th = theta_update(f, r, blk, base - warm.beta, n, warm.theta, cfg);
        CHECK(res.state.theta == th.theta);
        CHECK(res.state.beta == beta_update(f, base - a * th.theta, rho_bar, n));
        CHECK(res.delta_trace.size() == 3);
    }
    SUBCASE("delta is nondecreasing across half steps") {
        for (const auto& ff : {FunctionSpec::squared_l2_loss(), FunctionSpec::abs_l1_loss()}) {
            cfg.sweeps = 6;
            auto res = bcd_solve(ff, r, blk, c, b, n, rho_bar, warm, cfg);
            REQUIRE(res.delta_trace.size() == 13);
            for (std::size_t i = 1; i < res.delta_trace.size(); ++i) {
                CHECK(res.delta_trace[i] >= res.delta_trace[i - 1] - 1e-12 * std::abs(res.delta_trace[i - 1]));
            }
        }
    }
    SUBCASE("dimension checks") {
        CHECK_THROWS(bcd_solve(f, r, blk, c, b, n, rho_bar, BcdState::zeros(3, 7), cfg));
        BcdConfig bad;
        bad.sweeps = 0;
        CHECK_THROWS(bcd_solve(f, r, blk, c, b, n, rho_bar, warm, bad));
    }
}

TEST_CASE("local block spectrum") {
    Matrix a(3, 2);
    a << 1, 0, 0, 2, 0, 0;
    LocalBlock blk(a);
    CHECK(blk.gram_lambda_max() == doctest::Approx(4.0));
    CHECK(blk.samples() == 3);
    CHECK(blk.features() == 2);
}
