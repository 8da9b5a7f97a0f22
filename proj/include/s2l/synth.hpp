#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "s2l/annotate.hpp"
#include "s2l/audio.hpp"
#include "s2l/sessions.hpp"
#include "s2l/stt.hpp"

namespace s2l::synth {

/// Token text used for substitution corruption. It matches no keyword or alias,
/// so a substituted zone is guaranteed to be missed by alignment.
inline constexpr std::string_view kGarbledToken = "zzgarble";

struct SynthSpec {
    std::string session_id = "synth_000";
    std::string subject_id = "subject_000";
    int n_zones = 9;
    double fps = 30.0;
    int sample_rate_hz = 16000;
    /// Zero means "just long enough": n_zones * (burst + gap) + gap.
    double duration_s = 0.0;
    double burst_freq_hz = 800.0;
    double burst_len_s = 0.5;
    double gap_len_s = 1.5;
    double noise_rms = 0.02;
    double miss_rate = 0.0;
    double substitute_rate = 0.0;
    /// Zones dropped from the transcript regardless of miss_rate.
    std::vector<int> forced_misses;
    double token_confidence = 0.95;
    int offset_frames = 10;
    std::uint64_t seed = 1;

    /// Throws ArgumentError on out-of-range rates or an infeasible schedule.
    void validate() const;
    double effective_duration_s() const;
    double burst_start_s(int zone) const;
};

struct GroundTruth {
    MarkerTimeline timeline;
    FrameLabels labels;
};

struct Corruption {
    std::vector<int> missed;
    std::vector<int> substituted;
};

struct SynthSession {
    audio::AudioTrack track;
    stt::Transcript transcript;
    GroundTruth truth;
    sessions::SessionManifest manifest;
    Corruption corruption;
};

/// Deterministic in spec.seed. The manifest's paths are file names relative to
/// the session directory used by write_session.
SynthSession generate(const SynthSpec& spec);

/// Writes `<id>.wav`, `<id>.transcript.json`, `<id>.truth.csv` and `<id>.truth.json`
/// into `dir`.
void write_session(const SynthSession& session, const std::filesystem::path& dir);

/// Generates `count` sessions (session i seeded from spec.seed and i), writes them
/// and a `manifest.json` into `dir`. Returns the manifests.
std::vector<sessions::SessionManifest> generate_dataset(const SynthSpec& spec, std::size_t count,
                                                        const std::filesystem::path& dir);

SynthSpec spec_from_json(std::string_view text, const std::string& origin = "<synth spec>");

}  // namespace s2l::synth
