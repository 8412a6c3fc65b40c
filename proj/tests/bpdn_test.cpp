#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "dflect/bpdn.hpp"
#include "dflect/cdf97.hpp"
#include "dflect/fwht.hpp"
#include "dflect/sensing.hpp"

using namespace dflect;

namespace {

double norm2(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double norm1(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

// dense sensing matrix, built row by row from the Hadamard definition rather
// than through the transform under test
std::vector<std::vector<double>> dense_phi(const SensingPlan& plan) {
    size_t n = plan.order;
    double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<std::vector<double>> a(plan.omega.size(), std::vector<double>(n));
    for (size_t i = 0; i < plan.omega.size(); ++i) {
        auto row = hadamard_row(n, plan.omega[i]);
        for (size_t j = 0; j < n; ++j)
            a[i][j] = scale * row[j] * plan.modulation[j];
    }
    return a;
}

std::vector<double> dense_apply(const std::vector<std::vector<double>>& a,
                                const std::vector<double>& x) {
    std::vector<double> y(a.size(), 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        y[i] = std::inner_product(a[i].begin(), a[i].end(), x.begin(), 0.0);
    return y;
}

std::vector<double> dense_apply_t(const std::vector<std::vector<double>>& a,
                                  const std::vector<double>& y) {
    std::vector<double> x(a.empty() ? 0 : a[0].size(), 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < x.size(); ++j) x[j] += a[i][j] * y[i];
    return x;
}

}  // namespace

TEST_CASE("soft threshold hand values") {
    std::vector<double> v{3.0, -3.0, 0.5, -0.5, 1.0, 0.0};
    auto out = soft_threshold(v, 1.0);
    CHECK(out[0] == doctest::Approx(2.0));
    CHECK(out[1] == doctest::Approx(-2.0));
    CHECK(out[2] == 0.0);
    CHECK(out[3] == 0.0);
    CHECK(out[4] == 0.0);
    CHECK(out[5] == 0.0);
    // zero threshold is the identity
    auto same = soft_threshold(v, 0.0);
    for (size_t i = 0; i < v.size(); ++i) CHECK(same[i] == v[i]);
    CHECK_THROWS_AS(soft_threshold(v, -0.1), std::invalid_argument);
}

TEST_CASE("l2 ball projection") {
    std::vector<double> c{0.0, 0.0};
    auto inside = project_l2_ball({0.3, 0.4}, c, 1.0);
    CHECK(inside[0] == doctest::Approx(0.3));
    CHECK(inside[1] == doctest::Approx(0.4));

    auto on = project_l2_ball({3.0, 4.0}, c, 1.0);
    CHECK(on[0] == doctest::Approx(0.6));
    CHECK(on[1] == doctest::Approx(0.8));

    std::vector<double> off{1.0, 2.0};
    auto shifted = project_l2_ball({1.0, 5.0}, off, 1.5);
    CHECK(shifted[0] == doctest::Approx(1.0));
    CHECK(shifted[1] == doctest::Approx(3.5));

    auto collapsed = project_l2_ball({5.0, 5.0}, off, 0.0);
    CHECK(collapsed[0] == doctest::Approx(1.0));
    CHECK(collapsed[1] == doctest::Approx(2.0));

    CHECK_THROWS_AS(project_l2_ball({1.0}, {1.0, 2.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(project_l2_ball({1.0}, {1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("epsilon at or above the data norm returns the zero solution") {
    auto plan = make_plan(64, 16, 5ULL, false);
    std::vector<double> y(16, 0.25);
    BpdnConfig cfg;
    cfg.epsilon = norm2(y) * 1.5;
    cfg.levels = 1;
    auto res = solve_bpdn(y, plan, 8, 8, cfg);
    CHECK(res.iterations == 0);
    CHECK(res.converged);
    CHECK(res.residual_norm == doctest::Approx(norm2(y)));
    CHECK(res.objective == 0.0);
    for (double v : res.coefficients.values) CHECK(v == 0.0);
    for (double v : res.field.values) CHECK(v == 0.0);
}

TEST_CASE("solver recovers the unique feasible point when M equals N") {
    // Phi is orthogonal at full sampling, so the feasible set is a tiny
    // ellipsoid around the true coefficient vector.
    const int w = 16, h = 16, levels = 2;
    auto plan = make_plan(256, 256, 7ULL, true);

    std::mt19937_64 rng(99ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto truth = make_grid(w, h);
    for (auto& v : truth.values) v = gauss(rng);

    auto field = truth;
    dwt97_inverse(field, levels);
    auto y = apply_phi(field.values, plan);

    BpdnConfig cfg;
    cfg.epsilon = 1e-4 * norm2(y);
    cfg.levels = levels;
    cfg.max_iters = 20000;
    cfg.tol = 1e-9;
    auto res = solve_bpdn(y, plan, w, h, cfg);

    CHECK(res.converged);
    double err = 0.0;
    for (size_t i = 0; i < truth.values.size(); ++i)
        err += (res.coefficients.values[i] - truth.values[i]) *
               (res.coefficients.values[i] - truth.values[i]);
    err = std::sqrt(err) / norm2(truth.values);
    CHECK(err <= 1e-2);
    CHECK(res.residual_norm <= cfg.epsilon * 1.01);
    // the field member is the synthesis of the coefficients
    auto synth = res.coefficients;
    dwt97_inverse(synth, levels);
    for (size_t i = 0; i < synth.values.size(); ++i)
        CHECK(res.field.values[i] == doctest::Approx(synth.values[i]).epsilon(1e-12));
}

TEST_CASE("solutions satisfy the first-order optimality certificate") {
    // levels = 0 keeps the operator equal to Phi, so a dense copy of the
    // matrix provides an independent check that the returned point is a
    // minimizer: the residual correlation must be an l-infinity subgradient
    // of the l1 norm at the solution, and the ball constraint must be tight.
    const int w = 8, h = 4;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        auto plan = make_plan(32, 12, seed, false);
        auto a = dense_phi(plan);

        std::mt19937_64 rng(mix_seed(seed, 400ULL));
        std::vector<double> truth(32, 0.0);
        size_t i1 = rng() % 32, i2 = (i1 + 7 + rng() % 17) % 32;
        truth[i1] = 1.3;
        truth[i2] = -0.8;
        auto y = dense_apply(a, truth);

        BpdnConfig cfg;
        cfg.epsilon = 0.05 * norm2(y);
        cfg.levels = 0;
        cfg.max_iters = 30000;
        cfg.tol = 1e-11;
        auto res = solve_bpdn(y, plan, w, h, cfg);
        REQUIRE(res.converged);

        const auto& alpha = res.coefficients.values;
        // feasible with an active constraint
        std::vector<double> r(y.size());
        auto ax = dense_apply(a, alpha);
        for (size_t i = 0; i < y.size(); ++i) r[i] = y[i] - ax[i];
        CHECK(norm2(r) == doctest::Approx(cfg.epsilon).epsilon(1e-3));

        // no feasible point does better than the planted one
        CHECK(norm1(alpha) <= norm1(truth) * (1.0 + 1e-4));

        // stationarity: on the support, the correlation attains its maximum
        // with the matching sign
        auto u = dense_apply_t(a, r);
        double t = 0.0;
        for (double x : u) t = std::max(t, std::abs(x));
        REQUIRE(t > 0.0);
        double peak = 0.0;
        for (double x : alpha) peak = std::max(peak, std::abs(x));
        REQUIRE(peak > 0.0);
        for (size_t j = 0; j < alpha.size(); ++j) {
            if (std::abs(alpha[j]) > 1e-6 * peak) {
                double aligned = u[j] * (alpha[j] > 0 ? 1.0 : -1.0);
                CHECK(aligned >= t * (1.0 - 5e-3));
            }
        }
    }
}

TEST_CASE("solver output scales exactly with the data") {
    // internal normalization makes the iterate path identical for a
    // power-of-two rescaling, so equality is exact, not approximate
    const int w = 8, h = 4;
    auto plan = make_plan(32, 12, 11ULL, false);
    auto a = dense_phi(plan);
    std::vector<double> truth(32, 0.0);
    truth[3] = 1.0;
    truth[20] = -2.0;
    auto y = dense_apply(a, truth);

    BpdnConfig cfg;
    cfg.epsilon = 0.03 * norm2(y);
    cfg.levels = 0;
    cfg.max_iters = 5000;
    cfg.tol = 1e-9;
    auto res1 = solve_bpdn(y, plan, w, h, cfg);

    auto y2 = y;
    for (auto& v : y2) v *= 1024.0;
    auto cfg2 = cfg;
    cfg2.epsilon = cfg.epsilon * 1024.0;
    auto res2 = solve_bpdn(y2, plan, w, h, cfg2);

    CHECK(res1.iterations == res2.iterations);
    CHECK(res1.converged == res2.converged);
    for (size_t i = 0; i < res1.coefficients.values.size(); ++i)
        CHECK(res2.coefficients.values[i] == 1024.0 * res1.coefficients.values[i]);
    CHECK(res2.residual_norm == doctest::Approx(1024.0 * res1.residual_norm).epsilon(1e-12));
}

TEST_CASE("residual trace is recorded and shows overall progress") {
    const int w = 16, h = 16, levels = 2;
    auto plan = make_plan(256, 64, 21ULL, false);

    auto truth = make_grid(w, h);
    truth.at(8, 8) = 3.0;
    truth.at(2, 13) = -1.5;
    auto field = truth;
    dwt97_inverse(field, levels);
    auto y = apply_phi(field.values, plan);

    BpdnConfig cfg;
    cfg.epsilon = 0.02 * norm2(y);
    cfg.levels = levels;
    cfg.max_iters = 4000;
    cfg.tol = 1e-9;
    cfg.trace_every = 25;
    auto res = solve_bpdn(y, plan, w, h, cfg);

    CHECK(res.converged);
    CHECK(res.iterations > 0);
    CHECK(res.iterations <= cfg.max_iters);
    REQUIRE(!res.trace.empty());
    CHECK(static_cast<int>(res.trace.size()) == res.iterations / cfg.trace_every);
    CHECK(res.trace.back() < res.trace.front());
    CHECK(res.trace.back() <= cfg.epsilon * 1.01);
}

TEST_CASE("reconstruction error improves with more measurements") {
    const int w = 32, h = 32, levels = 3;
    auto field = make_grid(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double dr = r - 16.0, dc = c - 16.0;
            if (dr * dr + dc * dc <= 25.0) field.at(r, c) = 1.0;
        }
    double unorm = norm2(field.values);

    for (uint64_t seed : {3ULL, 14ULL}) {
        double errs[2];
        int idx = 0;
        for (size_t m : {100, 500}) {
            auto plan = make_plan(1024, m, seed, false);
            auto y = apply_phi(field.values, plan);
            std::mt19937_64 rng(mix_seed(seed, m));
            std::normal_distribution<double> gauss(0.0, 0.01 * norm2(y) / std::sqrt(double(m)));
            std::vector<double> noise(m);
            for (auto& v : noise) v = gauss(rng);
            for (size_t i = 0; i < m; ++i) y[i] += noise[i];

            BpdnConfig cfg;
            cfg.epsilon = 1.1 * norm2(noise);
            cfg.levels = levels;
            cfg.max_iters = 4000;
            cfg.tol = 1e-7;
            auto res = solve_bpdn(y, plan, w, h, cfg);
            double err = 0.0;
            for (size_t i = 0; i < field.values.size(); ++i)
                err += (res.field.values[i] - field.values[i]) *
                       (res.field.values[i] - field.values[i]);
            errs[idx++] = std::sqrt(err) / unorm;
        }
        CHECK(errs[1] < errs[0]);
        CHECK(errs[1] < 0.5);
    }
}

TEST_CASE("solver validates its inputs") {
    auto plan = make_plan(64, 16, 1ULL, false);
    std::vector<double> y(16, 1.0);
    BpdnConfig cfg;
    cfg.epsilon = 0.1;
    cfg.levels = 1;

    auto bad_eps = cfg;
    bad_eps.epsilon = -0.5;
    CHECK_THROWS_AS(solve_bpdn(y, plan, 8, 8, bad_eps), std::invalid_argument);

    std::vector<double> short_y(15, 1.0);
    CHECK_THROWS_AS(solve_bpdn(short_y, plan, 8, 8, cfg), std::invalid_argument);

    CHECK_THROWS_AS(solve_bpdn(y, plan, 8, 4, cfg), std::invalid_argument);

    auto bad_iters = cfg;
    bad_iters.max_iters = 0;
    CHECK_THROWS_AS(solve_bpdn(y, plan, 8, 8, bad_iters), std::invalid_argument);

    auto bad_levels = cfg;
    bad_levels.levels = 5;  // 8 is not divisible by 32
    CHECK_THROWS_AS(solve_bpdn(y, plan, 8, 8, bad_levels), std::invalid_argument);
}
