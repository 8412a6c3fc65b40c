#include "dflect/bpdn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dflect/cdf97.hpp"

namespace dflect {

namespace {

double norm2(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

std::vector<double> soft_threshold(std::vector<double> v, double t) {
    if (t < 0.0) throw std::invalid_argument("soft threshold must be nonnegative");
    for (auto& x : v) {
        if (x > t)
            x -= t;
        else if (x < -t)
            x += t;
        else
            x = 0.0;
    }
    return v;
}

std::vector<double> project_l2_ball(std::vector<double> v,
                                    const std::vector<double>& center, double radius) {
    if (radius < 0.0) throw std::invalid_argument("ball radius must be nonnegative");
    if (v.size() != center.size())
        throw std::invalid_argument("point and ball center differ in size");
    double d = 0.0;
    for (size_t i = 0; i < v.size(); ++i) d += (v[i] - center[i]) * (v[i] - center[i]);
    d = std::sqrt(d);
    if (d <= radius) return v;
    double shrink = (d > 0.0) ? radius / d : 0.0;
    for (size_t i = 0; i < v.size(); ++i) v[i] = center[i] + shrink * (v[i] - center[i]);
    return v;
}

BpdnResult solve_bpdn(const std::vector<double>& y, const SensingPlan& plan,
                      int width, int height, const BpdnConfig& config) {
    if (config.epsilon < 0.0) throw std::invalid_argument("epsilon must be nonnegative");
    if (config.max_iters < 1) throw std::invalid_argument("max_iters must be positive");
    if (config.tol <= 0.0) throw std::invalid_argument("tol must be positive");
    if (config.trace_every < 0) throw std::invalid_argument("trace_every must be nonnegative");
    if (y.size() != plan.omega.size())
        throw std::invalid_argument("measurement count does not match the plan");
    if (width <= 0 || height <= 0 ||
        plan.order != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("plan order does not match grid size");
    {
        auto shape_check = make_grid(width, height);
        dwt97_forward(shape_check, config.levels);  // validates levels against the dims
    }

    const size_t n = plan.order;
    const size_t m = y.size();
    const int levels = config.levels;

    BpdnResult res;
    res.coefficients = make_grid(width, height);
    res.field = make_grid(width, height);

    const double ynorm = norm2(y);
    if (config.epsilon >= ynorm || ynorm < 1e-300) {
        res.converged = true;
        res.residual_norm = ynorm;
        return res;
    }

    // work on y / ||y|| so the iterate path is scale invariant
    const double s = ynorm;
    std::vector<double> yn(m);
    for (size_t i = 0; i < m; ++i) yn[i] = y[i] / s;
    const double eps = config.epsilon / s;

    double sigma = config.sigma, tau = config.tau;
    if (sigma <= 0.0 || tau <= 0.0) {
        double opn = operator_norm_estimate(plan, width, height, levels,
                                            config.norm_iters, config.norm_seed);
        if (!(opn > 0.0)) throw numeric_error("operator norm estimate is not positive");
        if (sigma <= 0.0) sigma = 0.95 / opn;
        if (tau <= 0.0) tau = 0.95 / opn;
    }

    auto apply_a = [&](const std::vector<double>& alpha) {
        SpectrumGrid g = make_grid(width, height);
        g.values = alpha;
        dwt97_inverse(g, levels);
        return apply_phi(g.values, plan);
    };
    auto apply_at = [&](const std::vector<double>& q) {
        SpectrumGrid g = make_grid(width, height);
        g.values = adjoint_phi(q, plan);
        dwt97_synthesis_adjoint(g, levels);
        return g.values;
    };

    // warm start from the analysis of the backprojection
    std::vector<double> alpha;
    {
        SpectrumGrid g = make_grid(width, height);
        g.values = adjoint_phi(yn, plan);
        dwt97_forward(g, levels);
        alpha = std::move(g.values);
    }
    std::vector<double> alpha_bar = alpha;
    std::vector<double> q(m, 0.0);
    std::vector<double> snapshot = alpha;

    int it = 0;
    bool converged = false;
    for (it = 1; it <= config.max_iters; ++it) {
        // dual ascent then prox of the ball indicator's conjugate
        auto w = apply_a(alpha_bar);
        for (size_t i = 0; i < m; ++i) w[i] = q[i] + sigma * (w[i] - yn[i]);
        double wn = norm2(w);
        double factor = (wn > sigma * eps) ? 1.0 - sigma * eps / wn : 0.0;
        for (size_t i = 0; i < m; ++i) q[i] = factor * w[i];

        // primal descent then shrinkage, with overrelaxed extrapolation
        auto g = apply_at(q);
        for (size_t i = 0; i < n; ++i) g[i] = alpha[i] - tau * g[i];
        auto alpha_next = soft_threshold(std::move(g), tau);
        for (size_t i = 0; i < n; ++i) alpha_bar[i] = 2.0 * alpha_next[i] - alpha[i];
        alpha = std::move(alpha_next);

        if (it % 10 == 0) {
            double diff = 0.0, anorm = 0.0;
            for (size_t i = 0; i < n; ++i) {
                diff += (alpha[i] - snapshot[i]) * (alpha[i] - snapshot[i]);
                anorm += alpha[i] * alpha[i];
            }
            snapshot = alpha;
            double rel = std::sqrt(diff) / std::max(std::sqrt(anorm), 1e-30);
            auto ax = apply_a(alpha);
            for (size_t i = 0; i < m; ++i) ax[i] -= yn[i];
            double rn = norm2(ax);
            if (rel < config.tol && rn <= eps * 1.001) {
                converged = true;
            }
        }
        if (config.trace_every > 0 && it % config.trace_every == 0) {
            auto ax = apply_a(alpha);
            for (size_t i = 0; i < m; ++i) ax[i] -= yn[i];
            res.trace.push_back(s * norm2(ax));
        }
        if (converged) break;
    }
    res.iterations = std::min(it, config.max_iters);
    res.converged = converged;

    for (size_t i = 0; i < n; ++i) res.coefficients.values[i] = s * alpha[i];
    res.field = res.coefficients;
    dwt97_inverse(res.field, levels);
    auto ax = apply_phi(res.field.values, plan);
    double rn = 0.0;
    for (size_t i = 0; i < m; ++i) rn += (ax[i] - y[i]) * (ax[i] - y[i]);
    res.residual_norm = std::sqrt(rn);
    res.objective = 0.0;
    for (double v : res.coefficients.values) res.objective += std::abs(v);
    return res;
}

}  // namespace dflect
