#include <cmath>
#include <numbers>

#include "doctest.h"
#include "s2l/error.hpp"
#include "s2l/illum.hpp"
#include "s2l/refine.hpp"
#include "test_support.hpp"

using namespace s2l;
using namespace s2l::illum;

TEST_CASE("k2 derives from h, c and k_B") {
    constexpr RadiationConstants c;
    CHECK(std::abs(c.k2() - 1.4394e-2) / 1.4394e-2 < 1e-4);
}

TEST_CASE("chromaticity basics") {
    SUBCASE("identical channels give unit chromaticity") {
        ChromaticityParams p;
        p.wavelength_nm = {550.0, 550.0, 550.0};
        const auto c = chromaticity(p, {}, false);
        for (double v : c) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_THROWS_AS(chromaticity(p), ArgumentError);  // 550 nm is not a red or blue wavelength
    }
    SUBCASE("product of channels is one") {
        ChromaticityParams p;
        p.reflectance = {0.6, 0.3, 0.2};
        p.delta_amplitude = {1.2, 0.9, 1.1};
        for (double t : {1500.0, 3200.0, 6500.0, 20000.0}) {
            p.temperature_k = t;
            const auto c = chromaticity(p);
            CHECK(c[0] * c[1] * c[2] == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("uniform scaling of reflectance or amplitude cancels") {
        ChromaticityParams p;
        p.reflectance = {0.6, 0.3, 0.2};
        const auto base = chromaticity(p);
        auto q = p;
        for (auto& r : q.reflectance) r *= 7.5;
        for (auto& d : q.delta_amplitude) d *= 0.01;
        const auto scaled = chromaticity(q);
        for (std::size_t i = 0; i < 3; ++i) CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-12));
    }
    SUBCASE("invalid inputs") {
        ChromaticityParams p;
        p.reflectance[1] = 0.0;
        CHECK_THROWS_AS(chromaticity(p), ArgumentError);
        p = {};
        p.temperature_k = -1.0;
        CHECK_THROWS_AS(chromaticity(p), ArgumentError);
        p = {};
        p.wavelength_nm[0] = 600.0;
        CHECK_THROWS_AS(chromaticity(p), ArgumentError);
    }
    SUBCASE("tiny temperatures underflow loudly") {
        ChromaticityParams p;
        p.temperature_k = 1.0;
        CHECK_THROWS_AS(chromaticity(p), NumericError);
    }
}

TEST_CASE("decomposition") {
    ChromaticityParams p;
    p.reflectance = {0.55, 0.35, 0.25};
    p.delta_amplitude = {1.0, 1.3, 0.8};

    SUBCASE("factors multiply back to the chromaticity") {
        for (double t : {2000.0, 4000.0, 5000.0, 9000.0}) {
            p.temperature_k = t;
            const auto c = chromaticity(p);
            const auto d = decompose(p);
            for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(d.robust[i] * d.dependent[i] - c[i]) < 1e-12);
        }
    }
    SUBCASE("robust factor does not depend on temperature") {
        p.temperature_k = 2500.0;
        const auto a = decompose(p).robust;
        p.temperature_k = 12000.0;
        const auto b = decompose(p).robust;
        for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
    }
    SUBCASE("dependent factor tends to one at high temperature") {
        p.temperature_k = 1e9;
        for (double v : decompose(p).dependent) CHECK(std::abs(v - 1.0) < 1e-4);
    }
    SUBCASE("dependent factors have unit product") {
        const auto b = dependent_part(p.wavelength_nm, 3300.0);
        CHECK(b[0] * b[1] * b[2] == doctest::Approx(1.0).epsilon(1e-12));
        // Red gains relative to blue as the light gets warmer.
        CHECK(dependent_part(p.wavelength_nm, 2000.0)[0] > dependent_part(p.wavelength_nm, 8000.0)[0]);
    }
}

TEST_CASE("kernel initialization") {
    const ChromaticityParams base;
    const auto a = decompose(base).robust;

    SUBCASE("deterministic in the seed") {
        KernelInitSpec spec;
        spec.shape = {3, 4, 5};
        const auto k1 = init_kernel(spec, base);
        const auto k2 = init_kernel(spec, base);
        CHECK(k1.values == k2.values);
        spec.seed = 43;
        CHECK(init_kernel(spec, base).values != k1.values);
    }
    SUBCASE("zero spread reproduces the decomposition at the mean temperature") {
        KernelInitSpec spec;
        spec.shape = {2, 3};
        spec.channel_axis = 1;
        spec.t_std_k = 0.0;
        const auto k = init_kernel(spec, base);
        const auto c = chromaticity(base);
        for (std::size_t i = 0; i < k.values.size(); ++i) {
            CHECK(k.values[i] == doctest::Approx(c[channel_of(spec, i)]).epsilon(1e-12));
        }
        CHECK(channel_of(spec, 4) == 1);
    }
    SUBCASE("channel layout") {
        KernelInitSpec spec;
        spec.shape = {3, 2, 2};
        CHECK(channel_of(spec, 0) == 0);
        CHECK(channel_of(spec, 3) == 0);
        CHECK(channel_of(spec, 4) == 1);
        CHECK(channel_of(spec, 11) == 2);
        spec.channel_axis = 1;
        CHECK_THROWS_AS(spec.validate(), ArgumentError);
    }
    SUBCASE("sample mean matches the expected value") {
        KernelInitSpec spec;
        spec.shape = {3, 4000};
        const auto k = init_kernel(spec, base);
        // E[B_c(T)] by Simpson's rule over +-8 sd of the normal density.
        const int steps = 4000;
        const double lo = spec.t_mean_k - 8 * spec.t_std_k;
        const double h = 16 * spec.t_std_k / steps;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            double expect = 0.0;
            for (int s = 0; s <= steps; ++s) {
                const double t = lo + s * h;
                const double z = (t - spec.t_mean_k) / spec.t_std_k;
                const double pdf = std::exp(-0.5 * z * z) / (spec.t_std_k * std::sqrt(2 * std::numbers::pi));
                const double w = (s == 0 || s == steps) ? 1.0 : (s % 2 ? 4.0 : 2.0);
                expect += w * pdf * a[ch] * dependent_part(base.wavelength_nm, t)[ch];
            }
            expect *= h / 3.0;
            double mean = 0.0;
            double sq = 0.0;
            for (std::size_t j = 0; j < 4000; ++j) mean += k.values[ch * 4000 + j];
            mean /= 4000.0;
            for (std::size_t j = 0; j < 4000; ++j) sq += std::pow(k.values[ch * 4000 + j] - mean, 2);
            const double se = std::sqrt(sq / 3999.0 / 4000.0);
            CHECK(std::abs(mean - expect) < 3 * se);
        }
    }
    SUBCASE("export writes a readable tensor") {
        KernelInitSpec spec;
        spec.shape = {3, 2};
        const auto k = init_kernel(spec, base);
        const auto dir = s2l::testing::scratch_dir("kernel");
        export_kernel(k, dir / "k.bin");
        const auto f = refine::read_float_matrix(dir / "k.bin");
        CHECK(f.shape == std::vector<std::uint32_t>{3, 2});
        REQUIRE(f.values.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) CHECK(f.values[i] == doctest::Approx(k.values[i]).epsilon(1e-6));
    }
}
