#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dflect/common.hpp"
#include "dflect/sensing.hpp"

namespace dflect {

struct InstrumentModel {
    double focal_length = 0.1;    // meters
    double pinhole_radius = 2.5;  // grid pixels
    std::vector<std::array<double, 2>> ccd_pixels;  // probe offsets (x, y) in meters
    double sigma_s = 0.0;  // additive noise on the spectrum samples
    double sigma_y = 0.0;  // additive noise on the detector readings
    uint64_t noise_seed = 0;
};

void validate_model(const InstrumentModel& model);

// indicator disk of radius pinhole_radius centered on the grid center pixel
SpectrumGrid disk_spectrum(const InstrumentModel& model, int width, int height,
                           double pixel_pitch = 1.0);

// Continuous (row, col) position of the deflected spot: a thin lens of the
// given power probed at offset p deflects by tan(theta) = power * p per
// component, displacing the spot by pixel_pitch * focal_length * tan(theta)
// pixels from the grid center. Throws std::out_of_range if the center leaves
// the grid.
std::array<double, 2> lens_spot_center(double power_diopters,
                                       std::array<double, 2> location_p,
                                       const InstrumentModel& model, int width,
                                       int height, double pixel_pitch);

// unit-peak isotropic Gaussian spot of width spot_sigma at the deflected center
SpectrumGrid lens_spectrum(double power_diopters, std::array<double, 2> location_p,
                           const InstrumentModel& model, double spot_sigma,
                           int width, int height, double pixel_pitch);

// Biased binary acquisition at one camera pixel: with s' = s + n_s,
//   y_i = <pattern_i, s'> + n_y[i]   and   z = <1, s'> + n_z.
// Noise comes from mt19937_64(mix_seed(noise_seed ^ pixel_id)), drawn in the
// order n_s (N values), n_y (M values), n_z (one value), so bundles are
// reproducible per pixel regardless of scheduling.
MeasurementBundle measure(const SpectrumGrid& s, const SensingPlan& plan,
                          const InstrumentModel& model, uint32_t pixel_id = 0);

// single-precision spectrum files ("DFLS"): u16 version, u32 width, u32
// height, little-endian f32 values in row-major order
void write_spectrum(const std::string& path, const SpectrumGrid& grid);
SpectrumGrid read_spectrum(const std::string& path);

struct PhantomSpec {
    double power_diopters = 60.0;
    double spot_sigma = 2.0;
    int width = 64;
    int height = 64;
    double pixel_pitch = 1000.0;  // grid pixels per meter of deflection offset
};

struct DatasetPaths {
    std::string manifest;
    std::vector<std::string> bundles;
    std::vector<std::string> spectra;
};

// Simulates every CCD pixel of the model against one lens phantom: writes a
// phantom spectrum and a measurement bundle per pixel plus a JSON manifest.
// Rerunning with the same inputs reproduces every file byte for byte.
DatasetPaths snapshot_dataset(const PhantomSpec& spec, const SensingPlan& plan,
                              const InstrumentModel& model, const std::string& out_dir);

}  // namespace dflect
