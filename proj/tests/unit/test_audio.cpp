#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "s2l/audio.hpp"
#include "s2l/error.hpp"
#include "test_support.hpp"

using namespace s2l;
using namespace s2l::audio;
using s2l::testing::tone;
using s2l::testing::track_of;

namespace {

// O(N^2) reference transform for checking the FFT.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    return out;
}

std::size_t peak_bin(const std::vector<SpectrumBin>& bins, std::size_t from = 1, std::size_t to = SIZE_MAX) {
    to = std::min(to, bins.size());
    std::size_t best = from;
    for (std::size_t k = from; k < to; ++k) {
        if (bins[k].magnitude > bins[best].magnitude) best = k;
    }
    return best;
}

}  // namespace

TEST_CASE("to_mono averages channels") {
    SUBCASE("identical channels give the channel back") {
        const std::vector<std::vector<double>> ch{{0.1, -0.2, 0.3}, {0.1, -0.2, 0.3}};
        const auto t = to_mono(ch, 16000);
        CHECK(std::vector<double>(t.samples().begin(), t.samples().end()) == ch[0]);
        CHECK(t.source_channels() == 2);
    }
    SUBCASE("opposite channels cancel") {
        const std::vector<std::vector<double>> ch{{1.0, 1.0}, {-1.0, -1.0}};
        const auto t = to_mono(ch, 16000);
        CHECK(t.samples()[0] == 0.0);
        CHECK(t.samples()[1] == 0.0);
    }
    SUBCASE("hand-computed mean") {
        const std::vector<std::vector<double>> ch{{0.5, 0.0}, {0.1, 0.4}};
        const auto t = to_mono(ch, 16000);
        CHECK(t.samples()[0] == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(t.samples()[1] == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("idempotent on mono input") {
        const std::vector<std::vector<double>> ch{{0.25, -0.5, 0.75}};
        const auto once = to_mono(ch, 8000);
        const std::vector<std::vector<double>> again{{once.samples().begin(), once.samples().end()}};
        const auto twice = to_mono(again, 8000);
        CHECK(std::equal(once.samples().begin(), once.samples().end(), twice.samples().begin()));
    }
    SUBCASE("errors") {
        const std::vector<std::vector<double>> ragged{{0.0, 0.0}, {0.0}};
        CHECK_THROWS_AS(to_mono(ragged, 16000), StructuralError);
        CHECK_THROWS_AS(to_mono(std::span<const std::vector<double>>{}, 16000), StructuralError);
    }
}

TEST_CASE("AudioTrack enforces its invariants") {
    CHECK_THROWS_AS(AudioTrack({0.0}, 4000), ArgumentError);
    CHECK_THROWS_AS(AudioTrack({1.5}, 16000), ArgumentError);
    CHECK_THROWS_AS(AudioTrack({std::nan("")}, 16000), ArgumentError);
    CHECK_NOTHROW(AudioTrack({-1.0, 1.0}, 8000));
}

TEST_CASE("fft matches a direct DFT") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {u(gen), u(gen)};
        const auto expected = naive_dft(x);
        fft_inplace(x);
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(x[k] - expected[k]) < 1e-9);
    }
    std::vector<std::complex<double>> bad(12);
    CHECK_THROWS_AS(fft_inplace(bad), ArgumentError);
}

TEST_CASE("magnitude_spectrum") {
    constexpr int fs = 16000;
    SUBCASE("silence has zero magnitude everywhere") {
        const auto bins = magnitude_spectrum(track_of(std::vector<double>(4096, 0.0)), 0.0, 0.256);
        CHECK(std::all_of(bins.begin(), bins.end(), [](const SpectrumBin& b) { return b.magnitude == 0.0; }));
        CHECK(bins.back().freq_hz == doctest::Approx(fs / 2.0));
    }
    SUBCASE("1000 Hz sine peaks within one bin of 1000 Hz") {
        const auto bins = magnitude_spectrum(track_of(tone(1000.0, 0.256, fs)), 0.0, 0.256);
        const double df = bins[1].freq_hz;
        CHECK(df == doctest::Approx(fs / 4096.0));
        CHECK(std::abs(bins[peak_bin(bins)].freq_hz - 1000.0) <= df);
    }
    SUBCASE("two tones give two local maxima at their frequencies") {
        auto s = tone(440.0, 0.256, fs, 0.45);
        const auto hi = tone(5000.0, 0.256, fs, 0.45);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += hi[i];
        const auto bins = magnitude_spectrum(track_of(s), 0.0, 0.256);
        const double df = bins[1].freq_hz;
        const std::size_t split = bins.size() / 4;  // 2000 Hz separates the two peaks
        const auto low = peak_bin(bins, 1, split);
        const auto high = peak_bin(bins, split);
        CHECK(std::abs(bins[low].freq_hz - 440.0) <= df);
        CHECK(std::abs(bins[high].freq_hz - 5000.0) <= df);
        CHECK(bins[low].magnitude > bins[low - 1].magnitude);
        CHECK(bins[low].magnitude >= bins[low + 1].magnitude);
        CHECK(bins[high].magnitude > bins[high - 1].magnitude);
        CHECK(bins[high].magnitude >= bins[high + 1].magnitude);
    }
    SUBCASE("scaling the signal scales magnitudes") {
        std::mt19937 gen(11);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        std::vector<double> s(2000);
        for (auto& v : s) v = u(gen);
        const double alpha = 0.37;
        std::vector<double> scaled(s);
        for (auto& v : scaled) v *= alpha;
        const auto a = magnitude_spectrum(track_of(s), 0.0, 0.125);
        const auto b = magnitude_spectrum(track_of(scaled), 0.0, 0.125);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k].magnitude == doctest::Approx(alpha * a[k].magnitude));
    }
    SUBCASE("non-power-of-two windows are zero-padded") {
        const auto bins = magnitude_spectrum(track_of(tone(1000.0, 0.25, fs)), 0.0, 0.25);
        CHECK(bins.size() == 4096 / 2 + 1);
    }
    SUBCASE("range errors") {
        const auto t = track_of(std::vector<double>(1000, 0.0));
        CHECK_THROWS_AS(magnitude_spectrum(t, 0.05, 0.02), RangeError);
        CHECK_THROWS_AS(magnitude_spectrum(t, 0.0, 0.0005), RangeError);
        CHECK_THROWS_AS(magnitude_spectrum(t, -0.01, 0.01), RangeError);
    }
}

TEST_CASE("analyze_window") {
    constexpr int fs = 16000;
    const Band voice{300.0, 3000.0};
    SUBCASE("in-band tone concentrates energy") {
        const auto w = analyze_window(track_of(tone(1000.0, 0.256, fs)), 0.0, 0.256, voice);
        CHECK(w.band_energy_ratio >= 0.99);
        CHECK(std::abs(w.dominant_freq_hz - 1000.0) <= fs / 4096.0);
    }
    SUBCASE("out-of-band tone") {
        const auto w = analyze_window(track_of(tone(5000.0, 0.256, fs)), 0.0, 0.256, voice);
        CHECK(w.band_energy_ratio <= 0.01);
    }
    SUBCASE("silence has ratio zero") {
        const auto w = analyze_window(track_of(std::vector<double>(4096, 0.0)), 0.0, 0.256, voice);
        CHECK(w.band_energy_ratio == 0.0);
    }
    SUBCASE("DC offset does not count as energy") {
        const auto w = analyze_window(track_of(std::vector<double>(4096, 0.5)), 0.0, 0.256, voice,
                                      WindowFunction::Rectangular);
        CHECK(w.band_energy_ratio == 0.0);
    }
    SUBCASE("full band ratio is one") {
        std::mt19937 gen(3);
        std::uniform_real_distribution<double> u(-0.9, 0.9);
        std::vector<double> s(4096);
        for (auto& v : s) v = u(gen);
        const auto w = analyze_window(track_of(s), 0.0, 0.256, {1e-9, fs / 2.0});
        CHECK(w.band_energy_ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("invalid bands") {
        const auto t = track_of(std::vector<double>(4096, 0.0));
        CHECK_THROWS_AS(analyze_window(t, 0.0, 0.256, {3000.0, 300.0}), ArgumentError);
        CHECK_THROWS_AS(analyze_window(t, 0.0, 0.256, {300.0, 9000.0}), ArgumentError);
    }
}

TEST_CASE("voiced_segments") {
    constexpr int fs = 16000;
    VoicingParams p;
    SUBCASE("silence yields nothing") {
        CHECK(voiced_segments(track_of(std::vector<double>(3 * fs, 0.0)), p).empty());
    }
    SUBCASE("one burst") {
        std::vector<double> s(3 * fs, 0.0);
        s2l::testing::splice(s, tone(800.0, 0.5, fs, 0.8), 1.2, fs);
        const auto segs = voiced_segments(track_of(s), p);
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].start_s >= 1.2 - p.window_s);
        CHECK(segs[0].start_s <= 1.2 + 1e-9);
        CHECK(segs[0].end_s >= 1.7 - 1e-9);
        CHECK(segs[0].end_s <= 1.7 + p.window_s);
        CHECK(segs[0].mean_band_ratio >= p.ratio_threshold);
    }
    SUBCASE("two separated bursts") {
        std::vector<double> s(3 * fs, 0.0);
        s2l::testing::splice(s, tone(800.0, 0.5, fs, 0.8), 0.5, fs);
        s2l::testing::splice(s, tone(1200.0, 0.4, fs, 0.8), 1.9, fs);
        const auto segs = voiced_segments(track_of(s), p);
        REQUIRE(segs.size() == 2);
        CHECK(segs[0].end_s < segs[1].start_s);
    }
    SUBCASE("out-of-band burst is ignored") {
        std::vector<double> s(3 * fs, 0.0);
        s2l::testing::splice(s, tone(5000.0, 0.5, fs, 0.8), 1.0, fs);
        CHECK(voiced_segments(track_of(s), p).empty());
    }
    SUBCASE("parameter validation") {
        const auto t = track_of(std::vector<double>(fs, 0.0));
        CHECK_THROWS_AS(voiced_segments(t, {0.25, 0.3}), ArgumentError);
        CHECK_THROWS_AS(voiced_segments(t, {0.25, 0.0}), ArgumentError);
        VoicingParams bad;
        bad.ratio_threshold = 1.5;
        CHECK_THROWS_AS(voiced_segments(t, bad), ArgumentError);
    }
}

TEST_CASE("band ratio is invariant under amplitude scaling") {
    std::mt19937 gen(21);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    std::uniform_real_distribution<double> scale(-4.0, 4.0);
    std::vector<double> s = tone(900.0, 0.256, 16000, 0.5);
    for (auto& v : s) v += u(gen);
    const auto ref = analyze_window(track_of(s), 0.0, 0.256, {300.0, 3000.0});
    for (int i = 0; i < 50; ++i) {
        double a = scale(gen);
        if (std::abs(a) < 1e-3) a = 1.0;
        std::vector<double> t(s);
        for (auto& v : t) v = std::clamp(v * a / 4.0, -1.0, 1.0);
        const auto w = analyze_window(track_of(t), 0.0, 0.256, {300.0, 3000.0});
        CHECK(w.band_energy_ratio == doctest::Approx(ref.band_energy_ratio).epsilon(1e-9));
    }
}

TEST_CASE("WAV round trip and format handling") {
    const auto dir = s2l::testing::scratch_dir("wav");
    const auto t = track_of(tone(440.0, 0.1, 16000, 0.5));
    write_wav_pcm16(dir / "a.wav", t);
    const auto back = load_wav(dir / "a.wav");
    REQUIRE(back.size() == t.size());
    CHECK(back.sample_rate_hz() == 16000);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back.samples()[i] - t.samples()[i]) < 1.0 / 32767.0);

    auto write_raw = [&](const std::string& name, std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                         const std::vector<unsigned char>& payload) {
        std::ofstream out(dir / name, std::ios::binary);
        auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF)); };
        auto u16 = [&](std::uint16_t v) { out.put(static_cast<char>(v & 0xFF)); out.put(static_cast<char>(v >> 8)); };
        out.write("RIFF", 4);
        u32(36 + static_cast<std::uint32_t>(payload.size()));
        out.write("WAVEfmt ", 8);
        u32(16);
        u16(format);
        u16(channels);
        u32(8000);
        u32(8000u * channels * bits / 8);
        u16(static_cast<std::uint16_t>(channels * bits / 8));
        u16(bits);
        out.write("data", 4);
        u32(static_cast<std::uint32_t>(payload.size()));
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    };

    SUBCASE("stereo 24-bit mixes down") {
        // L = +0.5 (0x400000), R = -0.5 (0xC00000) -> mean 0
        write_raw("s24.wav", 1, 2, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0xC0});
        const auto w = read_wav(dir / "s24.wav");
        CHECK(w.channels.size() == 2);
        CHECK(w.channels[0][0] == doctest::Approx(0.5));
        CHECK(w.channels[1][0] == doctest::Approx(-0.5));
        CHECK(load_wav(dir / "s24.wav").samples()[0] == doctest::Approx(0.0));
    }
    SUBCASE("8-bit unsigned and float") {
        write_raw("u8.wav", 1, 1, 8, {0, 128, 255});
        const auto w8 = read_wav(dir / "u8.wav");
        CHECK(w8.channels[0][0] == doctest::Approx(-1.0));
        CHECK(w8.channels[0][1] == doctest::Approx(0.0));
        const float f = 0.25f;
        std::vector<unsigned char> bytes(4);
        std::memcpy(bytes.data(), &f, 4);
        write_raw("f32.wav", 3, 1, 32, bytes);
        CHECK(read_wav(dir / "f32.wav").channels[0][0] == doctest::Approx(0.25));
    }
    SUBCASE("compressed formats are rejected with the tag") {
        write_raw("mulaw.wav", 7, 1, 8, {0, 0});
        try {
            read_wav(dir / "mulaw.wav");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("0x7") != std::string::npos);
        }
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_wav(dir / "nope.wav"), IoError); }
}
