#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dflect/centroid.hpp"
#include "dflect/common.hpp"
#include "dflect/optics.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

// Everything a sweep needs, in one serializable bag. Noise sigmas are not
// stored: they are solved per lens from target_isnr_db, so two runs with the
// same config always see the same noise.
struct ExperimentConfig {
    int width = 64;
    int height = 64;
    double pixel_pitch = 1000.0;  // pixels per meter of deflection-plane offset
    double focal_length = 0.1;    // meters
    double pinhole_radius = 2.5;  // pixels
    std::vector<std::array<double, 2>> ccd_pixels = {{0.0015, 0.0},
                                                     {0.0, 0.002},
                                                     {-0.0022, 0.001},
                                                     {0.0018, -0.0018},
                                                     {-0.001, -0.0025}};
    std::vector<double> lens_powers = {60.0, 10.03};  // diopters
    std::vector<double> reconstruct_ratios = {0.02, 0.05, 0.10, 0.20, 0.50};
    std::vector<double> centroid_ratios = {0.002, 0.003, 0.0045, 0.0065,
                                           0.01,  0.02,  0.035,  0.05};
    int trials = 10;  // per (lens, ratio, location)
    std::uint64_t seed = 1;
    double target_isnr_db = 4.34;
    double rho = 0.0;               // matched-filter width; 0 means pinhole_radius
    double spot_sigma_floor = 1.5;  // pixels, spot width of a powerless lens
    double probe_extent = 0.0004;   // meters, growth of spot width with power
    int levels = 4;                 // wavelet depth for the solver
    int max_iters = 2000;
    double tol = 1e-6;
    int threads = 1;  // 0 means hardware concurrency
};

ExperimentConfig default_config();
void validate_config(const ExperimentConfig& cfg);
void save_config(const std::string& path, const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// JSON text forms of the config so callers can embed it in larger documents
// (the dataset manifest does). save_config/load_config wrap these.
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_text(const std::string& text,
                                       const std::string& context);

// Spot width used for the phantom of a given lens: the pinhole floor plus a
// deflection blur proportional to power, added in quadrature.
double lens_spot_sigma(const ExperimentConfig& cfg, double lens_power);

InstrumentModel make_instrument(const ExperimentConfig& cfg, double sigma_s,
                                double sigma_y, std::uint64_t noise_seed);

struct NoiseLevels {
    double sigma_s = 0.0;
    double sigma_y = 0.0;
    double achieved_isnr_db = 0.0;
};

// Solves for the detector noise scale whose mean full-sampling iSNR over the
// configured locations equals target_isnr_db. Exact bisection: draws scale
// linearly with sigma, so the dB curve is strictly monotone.
NoiseLevels tune_noise(const ExperimentConfig& cfg, size_t lens_index);

// The no-object acquisition the pipeline calibrates against: full sampling
// of the bare pinhole disk under this lens's tuned noise. prepare_lens fits
// its residual estimate to exactly this shot, so a dataset that stores it
// calibrates to the same numbers the sweeps use internally.
struct CalibrationShot {
    SensingPlan plan;
    MeasurementBundle bundle;
    NoiseLevels noise;
};

CalibrationShot calibration_shot(const ExperimentConfig& cfg, size_t lens_index);

// Per-lens context shared by the sweeps: tuned noise, the no-object
// calibration residual, and the full-sampling reference reconstruction plus
// its centroid for every location.
struct LensSetup {
    double power = 0.0;
    double spot_sigma = 0.0;
    NoiseLevels noise;
    double eps_full = 0.0;
    std::vector<SpectrumGrid> phantoms;
    std::vector<SpectrumGrid> references;
    std::vector<CentroidEstimate> truth;
    GaussianTemplate tmpl;
};

// noise_override skips tuning and imposes the given levels (used by the
// centroid sweep, which runs every lens under one shared noise floor).
LensSetup prepare_lens(const ExperimentConfig& cfg, size_t lens_index,
                       const NoiseLevels* noise_override = nullptr);

struct ReconstructRow {
    double lens_power = 0.0;
    double ratio = 0.0;
    int trial = 0;
    std::uint32_t pixel_id = 0;
    std::size_t m_count = 0;
    double osnr_db = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct CentroidRow {
    double lens_power = 0.0;
    double ratio = 0.0;
    int trial = 0;
    std::uint32_t pixel_id = 0;
    std::size_t m_count = 0;
    double error_px = 0.0;
};

// Fresh sampling pattern and noise per row; rows come back in config
// enumeration order (lens, ratio, trial, location) no matter how many worker
// threads ran them. ratio 1.0 reuses the reference reconstruction, so its
// oSNR is the +inf sentinel. When spectra_dir is non-null the first trial of
// location 0 writes its reconstruction there as a .dfls file.
std::vector<ReconstructRow> run_reconstruct_sweep(
    const ExperimentConfig& cfg, const std::string* spectra_dir = nullptr);

std::vector<CentroidRow> run_centroid_sweep(const ExperimentConfig& cfg);

struct RatioSummary {
    double lens_power = 0.0;
    double ratio = 0.0;
    std::size_t m_count = 0;
    double mean = 0.0;  // over finite entries; +inf only if all entries are
    double se = 0.0;    // standard error of the finite entries
    int count = 0;      // finite entries contributing to the mean
};

std::vector<RatioSummary> summarize_reconstruct(const std::vector<ReconstructRow>& rows);
std::vector<RatioSummary> summarize_centroid(const std::vector<CentroidRow>& rows);

void write_reconstruct_csv(const std::string& path, const std::vector<ReconstructRow>& rows);
void write_centroid_csv(const std::string& path, const std::vector<CentroidRow>& rows);
void write_summary_csv(const std::string& path, const std::string& metric,
                       const std::vector<RatioSummary>& sums);

std::vector<ReconstructRow> read_reconstruct_csv(const std::string& path);
std::vector<CentroidRow> read_centroid_csv(const std::string& path);

}  // namespace dflect
