#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dflect {

// Thrown when an input file or dataset is unusable (bad magic, truncation,
// inconsistent manifest). Maps to CLI exit code 2.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical routine cannot proceed (non-finite input,
// divergence). Maps to CLI exit code 3.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense 2-D deflection spectrum, row-major. pixel_pitch is the scale
// linking grid pixels to physical displacement on the modulator plane
// (pixels per meter of f*tan(theta)).
struct SpectrumGrid {
    int width = 0;
    int height = 0;
    double pixel_pitch = 1.0;
    std::vector<double> values;  // height*width, index r*width + c

    double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }
};

inline SpectrumGrid make_grid(int width, int height, double pixel_pitch = 1.0) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("grid dimensions must be positive");
    SpectrumGrid g;
    g.width = width;
    g.height = height;
    g.pixel_pitch = pixel_pitch;
    g.values.assign(static_cast<size_t>(width) * height, 0.0);
    return g;
}

// splitmix64; used to derive independent child seeds from one master seed
// so that per-task RNG streams do not depend on scheduling order.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

}  // namespace dflect
