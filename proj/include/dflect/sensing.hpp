#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dflect/common.hpp"

namespace dflect {

// Row selection and Rademacher modulation defining one spread-spectrum
// Hadamard sensing operator. omega holds distinct Sylvester row indices in
// ascending order; modulation holds per-column signs in {-1, +1}. With
// include_dc=false row 0 is never drawn: its biased measurement duplicates
// the transparent frame z_bar.
struct SensingPlan {
    size_t order = 0;  // N, power of two
    std::vector<size_t> omega;
    std::vector<int> modulation;
    uint64_t seed = 0;
    bool include_dc = false;
};

// Binary on-off masks realizing the biased rows (phi + 1)/2 on a modulator.
struct SlmPatternSet {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> mask;  // rows x cols, entries exactly 0 or 1
};

// One acquisition at one camera pixel. y_biased are the raw pattern
// measurements; z_bar is the transparent-pattern frame. When y_debiased is
// present it caches 2*y_biased - z_bar (unnormalized convention).
struct MeasurementBundle {
    uint32_t pixel_id = 0;
    std::vector<double> y_biased;
    std::optional<double> z_bar;
    std::optional<std::vector<double>> y_debiased;
};

// Draw a plan for the given transform order. Sampling is a seeded shuffle
// prefix (uniform without replacement); modulation is a seeded fair coin.
// Same seed, same plan.
SensingPlan make_plan(size_t order, size_t m_count, uint64_t seed, bool include_dc = false);

// Throws std::invalid_argument if the plan's fields are inconsistent.
void validate_plan(const SensingPlan& plan);

// y = subsample_omega(fwht(modulation .* s)); rows have unit norm.
std::vector<double> apply_phi(const std::vector<double>& s, const SensingPlan& plan);

// Exact adjoint of apply_phi.
std::vector<double> adjoint_phi(const std::vector<double>& y, const SensingPlan& plan);

// Binary masks: (hadamard_row(omega_i) .* modulation + 1) / 2.
SlmPatternSet make_patterns(const SensingPlan& plan);

// Recover calibrated measurements y = (2*y_biased - z_bar)/sqrt(N) so that
// debias(measure(s)) == apply_phi(s) for a noiseless acquisition. Throws
// data_error if y_biased is empty, sized wrong, or z_bar is missing.
std::vector<double> debias(const MeasurementBundle& bundle, const SensingPlan& plan);

// Mutual coherence sqrt(N) * max_ij |<gamma_j, psi_i>| between two
// orthonormal bases given as dense N x N matrices (basis vectors in
// columns, row-major storage). With modulation, the gamma vectors are
// premultiplied by diag(modulation). Dense computation, N <= 1024.
double coherence(const std::vector<double>& gamma, const std::vector<double>& psi, size_t n,
                 const std::vector<int>* modulation = nullptr);

// Dense orthonormal bases used as coherence baselines.
std::vector<double> identity_basis(size_t n);
std::vector<double> hadamard_basis(size_t n);
std::vector<double> haar_basis(size_t n);  // n a power of two

// Bundle container file: magic "DFCM", version 1, little-endian. Embeds the
// plan (seed, order, omega, modulation bitmap) followed by z_bar and the
// biased measurements. Readers reject unknown magic or version.
void write_bundle(const std::string& path, const MeasurementBundle& bundle,
                  const SensingPlan& plan);
MeasurementBundle read_bundle(const std::string& path, SensingPlan& plan_out);

}  // namespace dflect
