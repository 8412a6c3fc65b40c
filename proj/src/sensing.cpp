#include "dflect/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <numeric>
#include <random>

#include "dflect/fwht.hpp"

namespace dflect {

namespace {

bool power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr uint64_t kOmegaStream = 0x6f6d656761ULL;       // "omega"
constexpr uint64_t kModulationStream = 0x7369676e73ULL;  // "signs"

}  // namespace

SensingPlan make_plan(size_t order, size_t m_count, uint64_t seed, bool include_dc) {
    if (!power_of_two(order) || order < 2)
        throw std::invalid_argument("make_plan: order must be a power of two >= 2");
    size_t eligible = include_dc ? order : order - 1;
    if (m_count < 1 || m_count > eligible)
        throw std::invalid_argument("make_plan: m_count out of range for this order");

    SensingPlan plan;
    plan.order = order;
    plan.seed = seed;
    plan.include_dc = include_dc;

    std::vector<size_t> rows(eligible);
    std::iota(rows.begin(), rows.end(), include_dc ? 0 : 1);
    std::mt19937_64 omega_rng(mix_seed(seed, kOmegaStream));
    std::shuffle(rows.begin(), rows.end(), omega_rng);
    plan.omega.assign(rows.begin(), rows.begin() + m_count);
    std::sort(plan.omega.begin(), plan.omega.end());

    std::mt19937_64 sign_rng(mix_seed(seed, kModulationStream));
    plan.modulation.resize(order);
    for (auto& v : plan.modulation) v = (sign_rng() & 1) ? 1 : -1;
    return plan;
}

void validate_plan(const SensingPlan& plan) {
    if (!power_of_two(plan.order) || plan.order < 2)
        throw std::invalid_argument("plan: order must be a power of two >= 2");
    if (plan.omega.empty() || plan.omega.size() > plan.order)
        throw std::invalid_argument("plan: omega size out of range");
    for (size_t i = 0; i < plan.omega.size(); ++i) {
        if (plan.omega[i] >= plan.order)
            throw std::invalid_argument("plan: omega entry out of range");
        if (i > 0 && plan.omega[i] <= plan.omega[i - 1])
            throw std::invalid_argument("plan: omega must be strictly ascending");
    }
    if (plan.modulation.size() != plan.order)
        throw std::invalid_argument("plan: modulation length mismatch");
    for (int v : plan.modulation)
        if (v != 1 && v != -1)
            throw std::invalid_argument("plan: modulation entries must be +-1");
}

std::vector<double> apply_phi(const std::vector<double>& s, const SensingPlan& plan) {
    validate_plan(plan);
    if (s.size() != plan.order)
        throw std::invalid_argument("apply_phi: input length does not match plan order");
    std::vector<double> t(plan.order);
    for (size_t j = 0; j < plan.order; ++j) t[j] = s[j] * plan.modulation[j];
    fwht_inplace(t);
    std::vector<double> y(plan.omega.size());
    for (size_t i = 0; i < plan.omega.size(); ++i) y[i] = t[plan.omega[i]];
    return y;
}

std::vector<double> adjoint_phi(const std::vector<double>& y, const SensingPlan& plan) {
    validate_plan(plan);
    if (y.size() != plan.omega.size())
        throw std::invalid_argument("adjoint_phi: input length does not match plan subset");
    std::vector<double> t(plan.order, 0.0);
    for (size_t i = 0; i < plan.omega.size(); ++i) t[plan.omega[i]] = y[i];
    fwht_inplace(t);
    for (size_t j = 0; j < plan.order; ++j) t[j] *= plan.modulation[j];
    return t;
}

SlmPatternSet make_patterns(const SensingPlan& plan) {
    validate_plan(plan);
    SlmPatternSet set;
    set.rows = plan.omega.size();
    set.cols = plan.order;
    set.mask.resize(set.rows * set.cols);
    for (size_t i = 0; i < set.rows; ++i) {
        auto row = hadamard_row(plan.order, plan.omega[i]);
        for (size_t j = 0; j < set.cols; ++j)
            set.mask[i * set.cols + j] = (row[j] * plan.modulation[j] + 1) / 2;  // exact 0 or 1
    }
    return set;
}

std::vector<double> debias(const MeasurementBundle& bundle, const SensingPlan& plan) {
    validate_plan(plan);
    if (bundle.y_biased.empty())
        throw data_error("debias: bundle carries no biased measurements");
    if (bundle.y_biased.size() != plan.omega.size())
        throw data_error("debias: measurement count does not match plan subset");
    if (!bundle.z_bar.has_value())
        throw data_error("debias: transparent-frame measurement z_bar missing");
    double z = *bundle.z_bar;
    double s = 1.0 / std::sqrt(static_cast<double>(plan.order));
    std::vector<double> y(bundle.y_biased.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = (2.0 * bundle.y_biased[i] - z) * s;
    return y;
}

double coherence(const std::vector<double>& gamma, const std::vector<double>& psi, size_t n,
                 const std::vector<int>* modulation) {
    if (n == 0 || n > 1024)
        throw std::invalid_argument("coherence: dense computation supports 1 <= N <= 1024");
    if (gamma.size() != n * n || psi.size() != n * n)
        throw std::invalid_argument("coherence: basis matrices must be N x N");
    if (modulation && modulation->size() != n)
        throw std::invalid_argument("coherence: modulation length mismatch");

    auto check_orthonormal = [n](const std::vector<double>& b) {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i; j < n; ++j) {
                double dot = 0.0;
                for (size_t k = 0; k < n; ++k) dot += b[k * n + i] * b[k * n + j];
                if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-8)
                    throw std::invalid_argument("coherence: basis is not orthonormal");
            }
        }
    };
    check_orthonormal(gamma);
    check_orthonormal(psi);

    double peak = 0.0;
    std::vector<double> col(n);
    for (size_t j = 0; j < n; ++j) {
        for (size_t k = 0; k < n; ++k) {
            double g = gamma[k * n + j];
            col[k] = modulation ? g * (*modulation)[k] : g;
        }
        for (size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (size_t k = 0; k < n; ++k) dot += col[k] * psi[k * n + i];
            peak = std::max(peak, std::abs(dot));
        }
    }
    return std::sqrt(static_cast<double>(n)) * peak;
}

std::vector<double> identity_basis(size_t n) {
    std::vector<double> b(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) b[i * n + i] = 1.0;
    return b;
}

std::vector<double> hadamard_basis(size_t n) {
    if (!power_of_two(n))
        throw std::invalid_argument("hadamard_basis: order must be a power of two");
    std::vector<double> b(n * n);
    double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) {
        auto row = hadamard_row(n, i);
        for (size_t j = 0; j < n; ++j) b[i * n + j] = s * row[j];  // symmetric
    }
    return b;
}

std::vector<double> haar_basis(size_t n) {
    if (!power_of_two(n))
        throw std::invalid_argument("haar_basis: order must be a power of two");
    std::vector<double> b(n * n, 0.0);
    double c = 1.0 / std::sqrt(static_cast<double>(n));
    for (size_t k = 0; k < n; ++k) b[k * n + 0] = c;  // constant vector
    size_t col = 1;
    for (size_t scale = 1; scale < n; scale *= 2) {
        size_t support = n / scale;
        double v = std::sqrt(static_cast<double>(scale) / n);
        for (size_t shift = 0; shift < scale; ++shift, ++col) {
            size_t start = shift * support;
            for (size_t k = 0; k < support / 2; ++k) {
                b[(start + k) * n + col] = v;
                b[(start + support / 2 + k) * n + col] = -v;
            }
        }
    }
    return b;
}

namespace {

constexpr char kBundleMagic[4] = {'D', 'F', 'C', 'M'};
constexpr uint16_t kBundleVersion = 1;

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

template <class T>
void put(FILE* f, T v) {
    // host is little-endian; fixed-width fields are written verbatim
    if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw data_error("bundle write failed");
}

template <class T>
T get(FILE* f, const std::string& path) {
    T v;
    if (std::fread(&v, sizeof(T), 1, f) != 1)
        throw data_error("bundle file truncated: " + path);
    return v;
}

}  // namespace

void write_bundle(const std::string& path, const MeasurementBundle& bundle,
                  const SensingPlan& plan) {
    validate_plan(plan);
    if (bundle.y_biased.size() != plan.omega.size())
        throw std::invalid_argument("write_bundle: measurement count does not match plan");
    if (!bundle.z_bar.has_value())
        throw std::invalid_argument("write_bundle: z_bar is required in the container");

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("cannot open for writing: " + path);
    if (std::fwrite(kBundleMagic, 1, 4, f.get()) != 4) throw data_error("bundle write failed");
    put<uint16_t>(f.get(), kBundleVersion);
    put<uint64_t>(f.get(), plan.seed);
    put<uint32_t>(f.get(), static_cast<uint32_t>(plan.order));
    put<uint32_t>(f.get(), static_cast<uint32_t>(plan.omega.size()));
    put<uint8_t>(f.get(), plan.include_dc ? 1 : 0);
    put<uint32_t>(f.get(), bundle.pixel_id);
    for (size_t w : plan.omega) put<uint32_t>(f.get(), static_cast<uint32_t>(w));
    // modulation bitmap, LSB-first within each byte, bit set means +1
    size_t nbytes = (plan.order + 7) / 8;
    for (size_t b = 0; b < nbytes; ++b) {
        uint8_t byte = 0;
        for (size_t k = 0; k < 8; ++k) {
            size_t j = 8 * b + k;
            if (j < plan.order && plan.modulation[j] == 1) byte |= static_cast<uint8_t>(1u << k);
        }
        put<uint8_t>(f.get(), byte);
    }
    put<double>(f.get(), *bundle.z_bar);
    for (double v : bundle.y_biased) put<double>(f.get(), v);
}

MeasurementBundle read_bundle(const std::string& path, SensingPlan& plan_out) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw data_error("cannot open bundle: " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4) throw data_error("bundle file truncated: " + path);
    if (std::memcmp(magic, kBundleMagic, 4) != 0)
        throw data_error("not a measurement bundle (bad magic): " + path);
    auto version = get<uint16_t>(f.get(), path);
    if (version != kBundleVersion)
        throw data_error("unsupported bundle version " + std::to_string(version) + ": " + path);

    SensingPlan plan;
    plan.seed = get<uint64_t>(f.get(), path);
    plan.order = get<uint32_t>(f.get(), path);
    uint32_t m_count = get<uint32_t>(f.get(), path);
    plan.include_dc = get<uint8_t>(f.get(), path) != 0;

    MeasurementBundle bundle;
    bundle.pixel_id = get<uint32_t>(f.get(), path);
    plan.omega.resize(m_count);
    for (auto& w : plan.omega) w = get<uint32_t>(f.get(), path);
    size_t nbytes = (plan.order + 7) / 8;
    plan.modulation.resize(plan.order);
    for (size_t b = 0; b < nbytes; ++b) {
        auto byte = get<uint8_t>(f.get(), path);
        for (size_t k = 0; k < 8; ++k) {
            size_t j = 8 * b + k;
            if (j < plan.order) plan.modulation[j] = (byte >> k) & 1 ? 1 : -1;
        }
    }
    bundle.z_bar = get<double>(f.get(), path);
    bundle.y_biased.resize(m_count);
    for (auto& v : bundle.y_biased) v = get<double>(f.get(), path);

    try {
        validate_plan(plan);
    } catch (const std::invalid_argument& e) {
        throw data_error(std::string("bundle carries an invalid plan: ") + e.what());
    }
    plan_out = std::move(plan);
    return bundle;
}

}  // namespace dflect
