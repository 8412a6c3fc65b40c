#pragma once

#include <array>
#include <vector>

#include "dflect/common.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

struct GaussianTemplate {
    double rho = 2.5;     // Gaussian standard deviation in grid pixels
    SpectrumGrid support;  // centered unit-peak Gaussian, same shape as the data
};

GaussianTemplate make_template(int width, int height, double rho);

enum class CentroidMode { full, compressive };

struct CentroidEstimate {
    std::array<double, 2> tau{0.0, 0.0};  // (row, col) translation in pixels
    double score = 0.0;                   // attained correlation magnitude
    CentroidMode mode = CentroidMode::full;
    bool has_feature = false;  // false marks the distinguished no-feature result
};

// Matched filter: exhaustive search of |<s, template shifted by tau>| over
// all cyclic integer translations, ties broken toward the smallest signed
// (row, col) pair, then a quadratic 3x3 refinement clamped to half a pixel.
// An all-zero spectrum returns the no-feature result instead of an
// arbitrary translation.
CentroidEstimate centroid_full(const SpectrumGrid& s, const GaussianTemplate& tmpl);

// Same search run on the measurement-domain backprojection adjoint_phi(y).
// The bundle must be debiasable: either the unnormalized cache y_debiased or
// z_bar must be present (data_error otherwise).
CentroidEstimate centroid_compressive(const MeasurementBundle& bundle,
                                      const SensingPlan& plan,
                                      const GaussianTemplate& tmpl);

// Euclidean distance between two centroid translations; rejects no-feature
// inputs with data_error.
double centroid_error(const CentroidEstimate& a, const CentroidEstimate& b);

// 20 log10(||reference|| / ||reference - estimate||); +infinity when the
// estimate matches exactly. Rejects an all-zero reference.
double osnr(const SpectrumGrid& reference, const SpectrumGrid& estimate);

// 20 log10(||Phi s_no|| / ||y_no - Phi s_no||) on debiased measurements;
// +infinity when noiseless. Rejects a spectrum with no signal energy.
double isnr(const std::vector<double>& y_no, const SensingPlan& plan,
            const SpectrumGrid& s_no);

}  // namespace dflect
