#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "s2l/annotate.hpp"
#include "s2l/audio.hpp"

namespace s2l::testing {

inline std::vector<double> tone(double freq_hz, double duration_s, int fs, double amplitude = 1.0) {
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs);
    }
    return s;
}

inline audio::AudioTrack track_of(std::vector<double> samples, int fs = 16000) {
    return audio::AudioTrack(std::move(samples), fs);
}

/// Splices `burst` into `base` starting at `at_s`.
inline void splice(std::vector<double>& base, const std::vector<double>& burst, double at_s, int fs) {
    const auto first = static_cast<std::size_t>(std::llround(at_s * fs));
    for (std::size_t i = 0; i < burst.size() && first + i < base.size(); ++i) base[first + i] += burst[i];
}

inline FrameLabels labels_from(const std::vector<int>& zones, double fps = 30.0, int n_classes = 9) {
    FrameLabels l;
    l.fps = fps;
    l.n_classes = n_classes;
    for (int z : zones) l.labels.push_back({z, z == kUnlabeled ? Provenance::Unlabeled : Provenance::Stt});
    return l;
}

inline std::vector<int> zones_of(const FrameLabels& l) {
    std::vector<int> z;
    for (const auto& f : l.labels) z.push_back(f.zone);
    return z;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("s2l_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace s2l::testing
