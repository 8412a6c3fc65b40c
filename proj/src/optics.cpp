#include "dflect/optics.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "dflect/fwht.hpp"

namespace dflect {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

template <typename T>
void put(std::FILE* f, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if (std::fwrite(bytes, 1, sizeof(T), f) != sizeof(T))
        throw data_error("short write to spectrum file");
}

template <typename T>
T get(std::FILE* f, const std::string& path) {
    unsigned char bytes[sizeof(T)];
    if (std::fread(bytes, 1, sizeof(T), f) != sizeof(T))
        throw data_error("truncated spectrum file: " + path);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

std::array<double, 2> grid_center(int width, int height) {
    return {static_cast<double>(height / 2), static_cast<double>(width / 2)};
}

}  // namespace

void validate_model(const InstrumentModel& model) {
    if (!(model.focal_length > 0.0))
        throw std::invalid_argument("focal length must be positive");
    if (!(model.pinhole_radius >= 1.0))
        throw std::invalid_argument("pinhole radius must be at least one pixel");
    if (model.ccd_pixels.empty())
        throw std::invalid_argument("instrument needs at least one CCD pixel");
    if (model.sigma_s < 0.0 || model.sigma_y < 0.0)
        throw std::invalid_argument("noise levels must be nonnegative");
}

SpectrumGrid disk_spectrum(const InstrumentModel& model, int width, int height,
                           double pixel_pitch) {
    double r = model.pinhole_radius;
    if (!(r >= 1.0)) throw std::invalid_argument("pinhole radius must be at least one pixel");
    if (2.0 * r >= std::min(width, height))
        throw std::invalid_argument("pinhole disk does not fit inside the grid");
    auto g = make_grid(width, height, pixel_pitch);
    auto center = grid_center(width, height);
    for (int row = 0; row < height; ++row)
        for (int col = 0; col < width; ++col) {
            double dr = row - center[0], dc = col - center[1];
            if (dr * dr + dc * dc <= r * r) g.at(row, col) = 1.0;
        }
    return g;
}

std::array<double, 2> lens_spot_center(double power_diopters,
                                       std::array<double, 2> location_p,
                                       const InstrumentModel& model, int width,
                                       int height, double pixel_pitch) {
    if (!(model.focal_length > 0.0))
        throw std::invalid_argument("focal length must be positive");
    if (!(pixel_pitch > 0.0)) throw std::invalid_argument("pixel pitch must be positive");
    auto center = grid_center(width, height);
    double scale = pixel_pitch * model.focal_length * power_diopters;
    double row = center[0] + scale * location_p[1];
    double col = center[1] + scale * location_p[0];
    if (row < 0.0 || row > height - 1 || col < 0.0 || col > width - 1)
        throw std::out_of_range("deflected spot (" + std::to_string(row) + ", " +
                                std::to_string(col) + ") for probe (" +
                                std::to_string(location_p[0]) + ", " +
                                std::to_string(location_p[1]) + ") leaves the grid");
    return {row, col};
}

SpectrumGrid lens_spectrum(double power_diopters, std::array<double, 2> location_p,
                           const InstrumentModel& model, double spot_sigma,
                           int width, int height, double pixel_pitch) {
    if (!(spot_sigma > 0.0)) throw std::invalid_argument("spot sigma must be positive");
    auto center = lens_spot_center(power_diopters, location_p, model, width, height,
                                   pixel_pitch);
    auto g = make_grid(width, height, pixel_pitch);
    double inv = 1.0 / (2.0 * spot_sigma * spot_sigma);
    for (int row = 0; row < height; ++row)
        for (int col = 0; col < width; ++col) {
            double dr = row - center[0], dc = col - center[1];
            g.at(row, col) = std::exp(-(dr * dr + dc * dc) * inv);
        }
    return g;
}

MeasurementBundle measure(const SpectrumGrid& s, const SensingPlan& plan,
                          const InstrumentModel& model, uint32_t pixel_id) {
    validate_plan(plan);
    if (s.values.size() != plan.order)
        throw std::invalid_argument("spectrum size does not match the sensing plan");

    std::mt19937_64 rng(mix_seed(model.noise_seed ^ pixel_id));
    std::normal_distribution<double> site(0.0, model.sigma_s);
    std::normal_distribution<double> detector(0.0, model.sigma_y);

    const size_t n = plan.order;
    std::vector<double> sprime(n);
    for (size_t j = 0; j < n; ++j)
        sprime[j] = s.values[j] + (model.sigma_s > 0.0 ? site(rng) : 0.0);
    double total = std::accumulate(sprime.begin(), sprime.end(), 0.0);

    // <pattern_i, s'> = (sqrt(N) * (Phi s')_i + <1, s'>) / 2 via one transform
    std::vector<double> modulated(n);
    for (size_t j = 0; j < n; ++j) modulated[j] = plan.modulation[j] * sprime[j];
    fwht_inplace(modulated);
    double root = std::sqrt(static_cast<double>(n));

    MeasurementBundle bundle;
    bundle.pixel_id = pixel_id;
    bundle.y_biased.resize(plan.omega.size());
    for (size_t i = 0; i < plan.omega.size(); ++i) {
        double clean = 0.5 * (root * modulated[plan.omega[i]] + total);
        bundle.y_biased[i] = clean + (model.sigma_y > 0.0 ? detector(rng) : 0.0);
    }
    bundle.z_bar = total + (model.sigma_y > 0.0 ? detector(rng) : 0.0);
    return bundle;
}

void write_spectrum(const std::string& path, const SpectrumGrid& grid) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("cannot open spectrum file for writing: " + path);
    if (std::fwrite("DFLS", 1, 4, f.get()) != 4)
        throw data_error("short write to spectrum file: " + path);
    put<uint16_t>(f.get(), 1);
    put<uint32_t>(f.get(), static_cast<uint32_t>(grid.width));
    put<uint32_t>(f.get(), static_cast<uint32_t>(grid.height));
    for (double v : grid.values) put<float>(f.get(), static_cast<float>(v));
    if (std::fflush(f.get()) != 0) throw data_error("cannot flush spectrum file: " + path);
}

SpectrumGrid read_spectrum(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw data_error("cannot open spectrum file: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "DFLS", 4) != 0)
        throw data_error("not a spectrum file: " + path);
    auto version = get<uint16_t>(f.get(), path);
    if (version != 1)
        throw data_error("unsupported spectrum file version " + std::to_string(version) +
                         ": " + path);
    auto width = get<uint32_t>(f.get(), path);
    auto height = get<uint32_t>(f.get(), path);
    if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20))
        throw data_error("implausible spectrum dimensions in " + path);
    auto g = make_grid(static_cast<int>(width), static_cast<int>(height));
    for (auto& v : g.values) v = static_cast<double>(get<float>(f.get(), path));
    return g;
}

DatasetPaths snapshot_dataset(const PhantomSpec& spec, const SensingPlan& plan,
                              const InstrumentModel& model, const std::string& out_dir) {
    validate_model(model);
    validate_plan(plan);
    if (static_cast<size_t>(spec.width) * static_cast<size_t>(spec.height) != plan.order)
        throw std::invalid_argument("phantom shape does not match the sensing plan");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw data_error("cannot create dataset directory: " + out_dir);

    DatasetPaths paths;
    nlohmann::ordered_json manifest;
    manifest["format"] = "dflect-dataset";
    manifest["version"] = 1;
    manifest["grid"] = {{"width", spec.width},
                        {"height", spec.height},
                        {"order", plan.order},
                        {"pixel_pitch", spec.pixel_pitch}};
    manifest["phantom"] = {{"power_diopters", spec.power_diopters},
                           {"spot_sigma", spec.spot_sigma}};
    nlohmann::ordered_json pixels = nlohmann::ordered_json::array();
    for (const auto& p : model.ccd_pixels) pixels.push_back({p[0], p[1]});
    manifest["instrument"] = {{"focal_length", model.focal_length},
                              {"pinhole_radius", model.pinhole_radius},
                              {"sigma_s", model.sigma_s},
                              {"sigma_y", model.sigma_y},
                              {"noise_seed", model.noise_seed},
                              {"ccd_pixels", pixels}};
    manifest["plan"] = {{"seed", plan.seed},
                        {"m_count", plan.omega.size()},
                        {"include_dc", plan.include_dc}};

    char name[64];
    for (size_t i = 0; i < model.ccd_pixels.size(); ++i) {
        auto phantom = lens_spectrum(spec.power_diopters, model.ccd_pixels[i], model,
                                     spec.spot_sigma, spec.width, spec.height,
                                     spec.pixel_pitch);
        auto bundle = measure(phantom, plan, model, static_cast<uint32_t>(i));

        std::snprintf(name, sizeof name, "spectrum_%03zu.dfls", i);
        auto spectrum_path = (fs::path(out_dir) / name).string();
        write_spectrum(spectrum_path, phantom);
        paths.spectra.push_back(spectrum_path);

        std::snprintf(name, sizeof name, "bundle_%03zu.dfcm", i);
        auto bundle_path = (fs::path(out_dir) / name).string();
        write_bundle(bundle_path, bundle, plan);
        paths.bundles.push_back(bundle_path);
    }
    nlohmann::ordered_json bundle_names = nlohmann::ordered_json::array();
    nlohmann::ordered_json spectrum_names = nlohmann::ordered_json::array();
    for (const auto& p : paths.bundles) bundle_names.push_back(fs::path(p).filename().string());
    for (const auto& p : paths.spectra)
        spectrum_names.push_back(fs::path(p).filename().string());
    manifest["bundles"] = bundle_names;
    manifest["spectra"] = spectrum_names;

    paths.manifest = (fs::path(out_dir) / "manifest.json").string();
    FilePtr f(std::fopen(paths.manifest.c_str(), "wb"));
    if (!f) throw data_error("cannot write manifest: " + paths.manifest);
    auto text = manifest.dump(2);
    text.push_back('\n');
    if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
        throw data_error("short write to manifest: " + paths.manifest);
    return paths;
}

}  // namespace dflect
