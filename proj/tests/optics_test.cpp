#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dflect/optics.hpp"
#include "dflect/sensing.hpp"

using namespace dflect;

namespace {

InstrumentModel test_model() {
    InstrumentModel m;
    m.focal_length = 0.1;
    m.pinhole_radius = 2.5;
    m.ccd_pixels = {{0.0015, 0.0}, {0.0, 0.002}, {-0.0022, 0.001},
                    {0.0018, -0.0018}, {-0.001, -0.0025}};
    m.sigma_s = 0.0;
    m.sigma_y = 0.0;
    m.noise_seed = 7ULL;
    return m;
}

double grid_sum(const SpectrumGrid& g) {
    return std::accumulate(g.values.begin(), g.values.end(), 0.0);
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("disk spectrum is a centered indicator with near-circular mass") {
    auto model = test_model();

    SUBCASE("radius 1 sets the center pixel and its four neighbours") {
        model.pinhole_radius = 1.0;
        auto d = disk_spectrum(model, 64, 64);
        CHECK(d.at(32, 32) == 1.0);
        CHECK(d.at(31, 32) == 1.0);
        CHECK(d.at(33, 32) == 1.0);
        CHECK(d.at(32, 31) == 1.0);
        CHECK(d.at(32, 33) == 1.0);
        CHECK(grid_sum(d) == 5.0);
        for (double v : d.values) CHECK((v == 0.0 || v == 1.0));
    }

    SUBCASE("pixel count tracks the disk area within 10% at working radii") {
        for (double r : {2.5, 3.0, 4.0, 8.0}) {
            model.pinhole_radius = r;
            auto d = disk_spectrum(model, 64, 64);
            double area = 3.14159265358979323846 * r * r;
            CHECK(std::abs(grid_sum(d) - area) <= 0.10 * area);
        }
    }

    SUBCASE("indicator is symmetric under quarter turns about the center pixel") {
        model.pinhole_radius = 3.0;
        auto d = disk_spectrum(model, 64, 64);
        for (int dr = -6; dr <= 6; ++dr)
            for (int dc = -6; dc <= 6; ++dc)
                CHECK(d.at(32 + dr, 32 + dc) == d.at(32 + dc, 32 - dr));
    }

    SUBCASE("disk reaching half the grid side is rejected") {
        model.pinhole_radius = 32.0;
        CHECK_THROWS_AS(disk_spectrum(model, 64, 64), std::invalid_argument);
        model.pinhole_radius = 31.0;
        auto ok = disk_spectrum(model, 64, 64);
        CHECK(grid_sum(ok) > 0.0);
    }
}

TEST_CASE("lens spot center follows the paraxial deflection") {
    auto model = test_model();

    SUBCASE("zero power leaves the spot at the grid center") {
        auto c = lens_spot_center(0.0, {0.003, -0.002}, model, 64, 64, 1000.0);
        CHECK(c[0] == doctest::Approx(32.0));
        CHECK(c[1] == doctest::Approx(32.0));
        auto s = lens_spectrum(0.0, {0.003, -0.002}, model, 2.0, 64, 64, 1000.0);
        CHECK(s.at(32, 32) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("displacement ratio between lens powers equals the power ratio") {
        std::array<double, 2> p{0.0012, -0.0007};
        auto strong = lens_spot_center(60.0, p, model, 64, 64, 1000.0);
        auto weak = lens_spot_center(10.03, p, model, 64, 64, 1000.0);
        CHECK((strong[0] - 32.0) / (weak[0] - 32.0) ==
              doctest::Approx(60.0 / 10.03).epsilon(1e-12));
        CHECK((strong[1] - 32.0) / (weak[1] - 32.0) ==
              doctest::Approx(60.0 / 10.03).epsilon(1e-12));
    }

    SUBCASE("doubling the probe offset doubles the displacement") {
        auto c1 = lens_spot_center(60.0, {0.001, 0.0005}, model, 64, 64, 1000.0);
        auto c2 = lens_spot_center(60.0, {0.002, 0.001}, model, 64, 64, 1000.0);
        CHECK(c2[0] - 32.0 == doctest::Approx(2.0 * (c1[0] - 32.0)).epsilon(1e-12));
        CHECK(c2[1] - 32.0 == doctest::Approx(2.0 * (c1[1] - 32.0)).epsilon(1e-12));
    }

    SUBCASE("center displacement is linear with slope focal_length * pixel_pitch") {
        for (const auto& p : model.ccd_pixels) {
            auto c = lens_spot_center(60.0, p, model, 64, 64, 1000.0);
            CHECK(c[0] - 32.0 ==
                  doctest::Approx(1000.0 * 0.1 * 60.0 * p[1]).epsilon(1e-12));
            CHECK(c[1] - 32.0 ==
                  doctest::Approx(1000.0 * 0.1 * 60.0 * p[0]).epsilon(1e-12));
        }
    }

    SUBCASE("spot center outside the grid is rejected with a range error") {
        CHECK_THROWS_AS(lens_spectrum(60.0, {0.01, 0.0}, model, 2.0, 64, 64, 1000.0),
                        std::out_of_range);
        CHECK_THROWS_AS(lens_spectrum(60.0, {0.0, -0.02}, model, 2.0, 64, 64, 1000.0),
                        std::out_of_range);
    }
}

TEST_CASE("lens spectrum is a unit-peak nonnegative Gaussian at the deflected center") {
    auto model = test_model();
    auto s = lens_spectrum(60.0, {0.0015, 0.0}, model, 2.0, 64, 64, 1000.0);
    // center lands at column 32 + 9, row 32
    CHECK(s.at(32, 41) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : s.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
    }
    // one sigma away in each axis
    CHECK(s.at(32, 43) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(s.at(34, 41) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

    // a fractional center keeps the max close to, but below, one
    auto frac = lens_spectrum(60.0, {0.00157, 0.0}, model, 2.0, 64, 64, 1000.0);
    double mx = *std::max_element(frac.values.begin(), frac.values.end());
    CHECK(mx <= 1.0);
    CHECK(mx >= 0.9);
}

TEST_CASE("noiseless measurement matches explicit pattern inner products") {
    auto model = test_model();
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto plan = make_plan(4096, 128, seed, false);
        auto s = lens_spectrum(60.0, {0.0, 0.002}, model, 2.0, 64, 64, 1000.0);
        auto bundle = measure(s, plan, model, 0);
        REQUIRE(bundle.y_biased.size() == 128);
        REQUIRE(bundle.z_bar.has_value());

        auto patterns = make_patterns(plan);
        double total = grid_sum(s);
        CHECK(*bundle.z_bar == doctest::Approx(total).epsilon(1e-12));
        for (size_t i = 0; i < 16; ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < 4096; ++j)
                dot += patterns.mask[i * 4096 + j] * s.values[j];
            CHECK(bundle.y_biased[i] == doctest::Approx(dot).epsilon(1e-9));
        }

        // debiasing recovers the signed operator exactly
        auto direct = apply_phi(s.values, plan);
        auto deb = debias(bundle, plan);
        for (size_t i = 0; i < deb.size(); ++i)
            CHECK(std::abs(deb[i] - direct[i]) <= 1e-10);
    }
}

TEST_CASE("pure-noise measurements have the configured spread") {
    auto model = test_model();
    model.sigma_y = 0.3;
    model.sigma_s = 0.0;
    auto plan = make_plan(4096, 4096, 5ULL, true);
    auto zero = make_grid(64, 64);
    auto bundle = measure(zero, plan, model, 0);

    double mean = std::accumulate(bundle.y_biased.begin(), bundle.y_biased.end(), 0.0) / 4096.0;
    double var = 0.0;
    for (double v : bundle.y_biased) var += (v - mean) * (v - mean);
    var /= 4095.0;
    CHECK(std::sqrt(var) == doctest::Approx(0.3).epsilon(0.10));
    CHECK(std::abs(mean) <= 0.02);
}

TEST_CASE("measurement is deterministic in the seed and varies with the pixel id") {
    auto model = test_model();
    model.sigma_s = 0.05;
    model.sigma_y = 0.8;
    auto plan = make_plan(4096, 64, 9ULL, false);
    auto s = lens_spectrum(10.03, {0.0015, 0.0}, model, 2.0, 64, 64, 1000.0);

    auto b1 = measure(s, plan, model, 3);
    auto b2 = measure(s, plan, model, 3);
    CHECK(b1.pixel_id == 3);
    CHECK(*b1.z_bar == *b2.z_bar);
    for (size_t i = 0; i < b1.y_biased.size(); ++i)
        CHECK(b1.y_biased[i] == b2.y_biased[i]);

    auto b3 = measure(s, plan, model, 4);
    bool any_differ = (*b1.z_bar != *b3.z_bar);
    for (size_t i = 0; i < b1.y_biased.size() && !any_differ; ++i)
        any_differ = (b1.y_biased[i] != b3.y_biased[i]);
    CHECK(any_differ);

    auto small = make_grid(8, 8);
    CHECK_THROWS_AS(measure(small, plan, model, 0), std::invalid_argument);
}

TEST_CASE("spectrum files round-trip at single precision") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "dflect_optics_test";
    fs::create_directories(dir);
    auto path = (dir / "spot.dfls").string();

    auto model = test_model();
    auto s = lens_spectrum(60.0, {0.0018, -0.0018}, model, 2.5, 64, 64, 1000.0);
    write_spectrum(path, s);
    auto back = read_spectrum(path);
    REQUIRE(back.width == 64);
    REQUIRE(back.height == 64);
    for (size_t i = 0; i < s.values.size(); ++i)
        CHECK(back.values[i] == static_cast<double>(static_cast<float>(s.values[i])));

    // a second write of the loaded grid is byte-identical
    auto path2 = (dir / "spot2.dfls").string();
    write_spectrum(path2, back);
    CHECK(slurp(path) == slurp(path2));

    CHECK_THROWS_AS(read_spectrum((dir / "absent.dfls").string()), data_error);
    fs::remove_all(dir);
}

TEST_CASE("dataset snapshot writes one bundle per CCD pixel plus a manifest") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "dflect_dataset_test";
    fs::remove_all(dir);

    auto model = test_model();
    model.sigma_s = 0.01;
    model.sigma_y = 0.5;
    auto plan = make_plan(4096, 400, 13ULL, false);
    PhantomSpec spec;
    spec.power_diopters = 60.0;
    spec.spot_sigma = 2.0;
    spec.width = 64;
    spec.height = 64;
    spec.pixel_pitch = 1000.0;

    auto paths = snapshot_dataset(spec, plan, model, dir.string());
    CHECK(paths.bundles.size() == 5);
    CHECK(paths.spectra.size() == 5);
    REQUIRE(fs::exists(paths.manifest));

    // bundles agree with direct measurement, bit for bit
    for (size_t i = 0; i < paths.bundles.size(); ++i) {
        auto loaded = read_bundle(paths.bundles[i], plan);
        auto phantom = lens_spectrum(spec.power_diopters, model.ccd_pixels[i], model,
                                     spec.spot_sigma, spec.width, spec.height,
                                     spec.pixel_pitch);
        auto direct = measure(phantom, plan, model, static_cast<uint32_t>(i));
        CHECK(loaded.pixel_id == direct.pixel_id);
        REQUIRE(loaded.z_bar.has_value());
        CHECK(*loaded.z_bar == *direct.z_bar);
        for (size_t k = 0; k < direct.y_biased.size(); ++k)
            CHECK(loaded.y_biased[k] == direct.y_biased[k]);
    }

    // manifest records the grid shape and total dimension
    {
        std::ifstream in(paths.manifest);
        std::string text(std::istreambuf_iterator<char>(in), {});
        CHECK(text.find("\"width\": 64") != std::string::npos);
        CHECK(text.find("\"height\": 64") != std::string::npos);
        CHECK(text.find("\"order\": 4096") != std::string::npos);
    }

    // a rerun reproduces every file byte for byte
    auto before = slurp(paths.bundles[2]);
    auto again = snapshot_dataset(spec, plan, model, dir.string());
    CHECK(slurp(again.bundles[2]) == before);

    // refusing to write over a plain file
    auto blocked = fs::temp_directory_path() / "dflect_dataset_blocked";
    fs::remove_all(blocked);
    { std::ofstream out(blocked); out << "x"; }
    CHECK_THROWS_AS(snapshot_dataset(spec, plan, model, blocked.string()), data_error);
    fs::remove(blocked);
    fs::remove_all(dir);
}
