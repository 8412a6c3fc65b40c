#include "dflect/cdf97.hpp"

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dflect {

namespace {

constexpr double kAlpha = -1.586134342059924;
constexpr double kBeta = -0.052980118572961;
constexpr double kGamma = 0.882911075530934;
constexpr double kDelta = 0.443506852043971;
// ties the analysis lowpass DC gain to sqrt(2)
const double kZeta = std::sqrt(2.0) / (1.0 + 2.0 * kBeta * (1.0 + 2.0 * kAlpha));

size_t reflect(ptrdiff_t i, ptrdiff_t n) {
    while (i < 0 || i >= n) i = (i < 0) ? -i : 2 * (n - 1) - i;
    return static_cast<size_t>(i);
}

// x[j] += c * (x[j-1] + x[j+1]) for all j of the given parity
void lift(std::vector<double>& x, size_t parity, double c) {
    auto n = static_cast<ptrdiff_t>(x.size());
    for (ptrdiff_t j = static_cast<ptrdiff_t>(parity); j < n; j += 2)
        x[static_cast<size_t>(j)] += c * (x[reflect(j - 1, n)] + x[reflect(j + 1, n)]);
}

// transpose of lift: scatter c * x[j] into both neighbours. Only entries of
// the opposite parity are written, so the pass is safe in place.
void lift_adjoint(std::vector<double>& x, size_t parity, double c) {
    auto n = static_cast<ptrdiff_t>(x.size());
    for (ptrdiff_t j = static_cast<ptrdiff_t>(parity); j < n; j += 2) {
        double v = c * x[static_cast<size_t>(j)];
        x[reflect(j - 1, n)] += v;
        x[reflect(j + 1, n)] += v;
    }
}

// natural order in, [approx | detail] out
void analysis_1d(std::vector<double>& x, std::vector<double>& tmp) {
    size_t n = x.size(), h = n / 2;
    lift(x, 1, kAlpha);
    lift(x, 0, kBeta);
    lift(x, 1, kGamma);
    lift(x, 0, kDelta);
    for (size_t i = 0; i < h; ++i) {
        tmp[i] = kZeta * x[2 * i];
        tmp[h + i] = x[2 * i + 1] / kZeta;
    }
    x.swap(tmp);
}

// [approx | detail] in, natural order out
void synthesis_1d(std::vector<double>& x, std::vector<double>& tmp) {
    size_t n = x.size(), h = n / 2;
    for (size_t i = 0; i < h; ++i) {
        tmp[2 * i] = x[i] / kZeta;
        tmp[2 * i + 1] = kZeta * x[h + i];
    }
    x.swap(tmp);
    lift(x, 0, -kDelta);
    lift(x, 1, -kGamma);
    lift(x, 0, -kBeta);
    lift(x, 1, -kAlpha);
}

// transpose of synthesis_1d: natural order in, [approx | detail] out.
// The lifting steps transpose in reverse order with the same coefficients,
// and the diagonal scaling is its own transpose.
void synthesis_adjoint_1d(std::vector<double>& x, std::vector<double>& tmp) {
    size_t n = x.size(), h = n / 2;
    lift_adjoint(x, 1, -kAlpha);
    lift_adjoint(x, 0, -kBeta);
    lift_adjoint(x, 1, -kGamma);
    lift_adjoint(x, 0, -kDelta);
    for (size_t i = 0; i < h; ++i) {
        tmp[i] = x[2 * i] / kZeta;
        tmp[h + i] = kZeta * x[2 * i + 1];
    }
    x.swap(tmp);
}

void check_dims(const SpectrumGrid& grid, int levels) {
    if (levels < 0 || levels > 30)
        throw std::invalid_argument("wavelet levels out of range: " + std::to_string(levels));
    if (levels == 0) return;
    int div = 1 << levels;
    if (grid.width % div != 0 || grid.height % div != 0 || grid.width < div || grid.height < div)
        throw std::invalid_argument("grid " + std::to_string(grid.width) + "x" +
                                    std::to_string(grid.height) + " is not divisible by 2^" +
                                    std::to_string(levels));
}

template <typename Op>
void apply_separable(SpectrumGrid& grid, int w, int h, Op op) {
    std::vector<double> buf, tmp;
    buf.reserve(static_cast<size_t>(std::max(w, h)));
    tmp.resize(static_cast<size_t>(std::max(w, h)));
    for (int r = 0; r < h; ++r) {
        buf.assign(grid.values.begin() + static_cast<size_t>(r) * grid.width,
                   grid.values.begin() + static_cast<size_t>(r) * grid.width + w);
        tmp.resize(static_cast<size_t>(w));
        op(buf, tmp);
        for (int c = 0; c < w; ++c) grid.at(r, c) = buf[static_cast<size_t>(c)];
    }
    for (int c = 0; c < w; ++c) {
        buf.resize(static_cast<size_t>(h));
        for (int r = 0; r < h; ++r) buf[static_cast<size_t>(r)] = grid.at(r, c);
        tmp.resize(static_cast<size_t>(h));
        op(buf, tmp);
        for (int r = 0; r < h; ++r) grid.at(r, c) = buf[static_cast<size_t>(r)];
    }
}

}  // namespace

void dwt97_forward(SpectrumGrid& grid, int levels) {
    check_dims(grid, levels);
    for (int lev = 0; lev < levels; ++lev)
        apply_separable(grid, grid.width >> lev, grid.height >> lev, analysis_1d);
}

void dwt97_inverse(SpectrumGrid& grid, int levels) {
    check_dims(grid, levels);
    for (int lev = levels - 1; lev >= 0; --lev)
        apply_separable(grid, grid.width >> lev, grid.height >> lev, synthesis_1d);
}

void dwt97_synthesis_adjoint(SpectrumGrid& grid, int levels) {
    check_dims(grid, levels);
    // S = S_0 S_1 ... S_{L-1} (coarse applied first when inverting), so
    // S^T = S_{L-1}^T ... S_0^T runs through the levels in forward order.
    for (int lev = 0; lev < levels; ++lev)
        apply_separable(grid, grid.width >> lev, grid.height >> lev, synthesis_adjoint_1d);
}

double operator_norm_estimate(const SensingPlan& plan, int width, int height,
                              int levels, int iters, uint64_t seed) {
    if (width <= 0 || height <= 0 ||
        plan.order != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("plan order does not match grid size");
    if (iters < 1) throw std::invalid_argument("power iteration needs at least one step");
    auto probe = make_grid(width, height);
    check_dims(probe, levels);

    std::mt19937_64 rng(mix_seed(seed, 0x70776974ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : probe.values) v = gauss(rng);

    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        double vn = norm(probe.values);
        if (vn < 1e-300) return 0.0;
        for (auto& v : probe.values) v /= vn;

        auto field = probe;
        dwt97_inverse(field, levels);
        auto y = apply_phi(field.values, plan);
        sigma = norm(y);

        auto back = make_grid(width, height);
        back.values = adjoint_phi(y, plan);
        dwt97_synthesis_adjoint(back, levels);
        probe = back;
    }
    return sigma;
}

}  // namespace dflect
