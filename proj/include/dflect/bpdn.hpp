#pragma once

#include <cstdint>
#include <vector>

#include "dflect/common.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

// elementwise sign(v) * max(|v| - t, 0), t >= 0
std::vector<double> soft_threshold(std::vector<double> v, double t);

// nearest point of the closed ball ||x - center|| <= radius
std::vector<double> project_l2_ball(std::vector<double> v,
                                    const std::vector<double>& center, double radius);

struct BpdnConfig {
    double epsilon = 0.0;  // residual ball radius, same units as y
    int max_iters = 2000;
    double tol = 1e-6;   // relative iterate change, checked every 10 iterations
    int levels = 4;      // wavelet depth of the sparsity transform
    double sigma = 0.0;  // dual step, 0 selects 0.95 / ||A|| automatically
    double tau = 0.0;    // primal step, 0 selects 0.95 / ||A|| automatically
    int trace_every = 0;    // record the residual norm every k iterations, 0 = off
    int norm_iters = 60;    // power iterations behind the automatic step size
    uint64_t norm_seed = 0x73746570ULL;
};

struct BpdnResult {
    SpectrumGrid coefficients;  // wavelet-domain minimizer
    SpectrumGrid field;         // its synthesis, the reconstructed spectrum
    int iterations = 0;
    bool converged = false;
    double residual_norm = 0.0;  // ||y - A alpha|| at the returned point
    double objective = 0.0;      // l1 norm of the coefficients
    std::vector<double> trace;   // residual norms, one per trace_every iterations
};

// min ||alpha||_1  s.t.  ||y - Phi * synthesis(alpha)|| <= epsilon,
// solved with a primal-dual splitting. The data is normalized internally, so
// scaling y and epsilon together rescales the solution exactly. epsilon >=
// ||y|| short-circuits to the zero solution.
BpdnResult solve_bpdn(const std::vector<double>& y, const SensingPlan& plan,
                      int width, int height, const BpdnConfig& config);

}  // namespace dflect
