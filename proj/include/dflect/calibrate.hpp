#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "dflect/common.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

struct NoiseEstimate {
    double eps_full = 0.0;     // residual norm of the best fit, at full sampling
    double disk_height = 0.0;  // fitted reference-disk amplitude
    std::array<double, 2> origin_offset{0.0, 0.0};  // (row, col) shift in pixels
};

// Fits a pinhole reference disk to debiased no-object measurements taken at
// full sampling (M = N): searches origin offsets on a +-2 pixel grid in
// half-pixel steps, bilinearly shifting a binary disk of the given radius,
// and solves the closed-form least-squares height for each candidate. The
// returned eps_full is the smallest attained residual norm.
NoiseEstimate fit_reference(const std::vector<double>& y_no, const SensingPlan& plan,
                            int width, int height, double pinhole_radius);

// Scales a full-sampling noise bound down to m_count measurements:
// eps_full * sqrt(m_count + 2 sqrt(m_count)) / sqrt(n_total). Note the
// factor stays slightly above 1 even at m_count == n_total; the rule keeps
// its concentration slack everywhere.
double scale_epsilon(double eps_full, size_t m_count, size_t n_total);

}  // namespace dflect
