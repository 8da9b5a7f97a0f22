#include "s2l/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/rng.hpp"

namespace s2l::synth {
namespace {

const char* const kDigits[] = {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};

}  // namespace

double SynthSpec::effective_duration_s() const {
    if (duration_s > 0.0) return duration_s;
    return n_zones * (burst_len_s + gap_len_s) + gap_len_s;
}

double SynthSpec::burst_start_s(int zone) const { return gap_len_s + (zone - 1) * (burst_len_s + gap_len_s); }

void SynthSpec::validate() const {
    if (n_zones < 1 || n_zones > 9) throw ArgumentError("n_zones must lie in [1, 9]");
    if (!(fps > 0.0)) throw ArgumentError("fps must be positive");
    if (sample_rate_hz < audio::kMinSampleRateHz) throw ArgumentError("sample rate below 8000 Hz");
    if (!(burst_freq_hz > 300.0 && burst_freq_hz < 3000.0)) throw ArgumentError("burst frequency must lie in (300, 3000) Hz");
    if (burst_freq_hz >= sample_rate_hz / 2.0) throw ArgumentError("burst frequency above Nyquist");
    if (!(burst_len_s > 0.0) || !(gap_len_s >= 0.0)) throw ArgumentError("burst/gap lengths must be positive");
    if (!(noise_rms >= 0.0) || 4.0 * noise_rms >= 1.0) throw ArgumentError("noise_rms must lie in [0, 0.25)");
    for (double r : {miss_rate, substitute_rate}) {
        if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError("corruption rates must lie in [0, 1]");
    }
    if (!(token_confidence >= 0.0 && token_confidence <= 1.0)) throw ArgumentError("token confidence outside [0, 1]");
    if (offset_frames < 0) throw ArgumentError("offset_frames must be non-negative");
    for (int z : forced_misses) {
        if (z < 1 || z > n_zones) throw ArgumentError("forced miss zone out of range");
    }
    const double last_end = burst_start_s(n_zones) + burst_len_s;
    if (last_end > effective_duration_s() + 1e-9) {
        std::ostringstream msg;
        msg << "infeasible schedule: bursts end at " << last_end << " s but duration is " << effective_duration_s()
            << " s";
        throw ArgumentError(msg.str());
    }
}

SynthSession generate(const SynthSpec& spec) {
    spec.validate();
    const double duration = spec.effective_duration_s();
    const auto n_samples = static_cast<std::size_t>(std::llround(duration * spec.sample_rate_hz));
    const double fs = spec.sample_rate_hz;
    const double amplitude = 1.0 - 4.0 * spec.noise_rms;

    SplitMix64 noise_rng(stream_seed(spec.seed, 0));
    std::vector<double> samples(n_samples, 0.0);
    if (spec.noise_rms > 0.0) {
        for (auto& s : samples) {
            double v;
            do {
                v = noise_rng.normal();
            } while (std::abs(v) > 4.0);
            s = spec.noise_rms * v;
        }
    }

    MarkerTimeline truth;
    truth.session_id = spec.session_id;
    truth.zone_count = spec.n_zones;
    for (int z = 1; z <= spec.n_zones; ++z) {
        const double start = spec.burst_start_s(z);
        const double end = start + spec.burst_len_s;
        truth.detections.push_back({z, start, end, Provenance::Stt, 1.0});
        const auto first = static_cast<std::size_t>(std::llround(start * fs));
        const auto last = std::min(n_samples, static_cast<std::size_t>(std::llround(end * fs)));
        for (std::size_t i = first; i < last; ++i) {
            const double t = static_cast<double>(i - first) / fs;
            samples[i] += amplitude * std::sin(2.0 * std::numbers::pi * spec.burst_freq_hz * t);
        }
    }

    SynthSession out{audio::AudioTrack(std::move(samples), spec.sample_rate_hz), {}, {}, {}, {}};
    out.truth.timeline = truth;
    const auto n_frames = static_cast<std::size_t>(std::floor(duration * spec.fps));
    out.truth.labels = annotate::emit_frame_labels(truth, spec.fps, n_frames, spec.offset_frames);

    SplitMix64 corrupt_rng(stream_seed(spec.seed, 1));
    out.transcript.source_id = "synth";
    for (const auto& d : truth.detections) {
        const double u_miss = corrupt_rng.uniform();
        const double u_sub = corrupt_rng.uniform();
        const bool forced = std::find(spec.forced_misses.begin(), spec.forced_misses.end(), d.zone) !=
                            spec.forced_misses.end();
        if (forced || u_miss < spec.miss_rate) {
            out.corruption.missed.push_back(d.zone);
            continue;
        }
        std::string text = kDigits[d.zone - 1];
        if (u_sub < spec.substitute_rate) {
            text = std::string(kGarbledToken);
            out.corruption.substituted.push_back(d.zone);
        }
        out.transcript.tokens.push_back({text, d.start_s, d.end_s, spec.token_confidence});
    }

    auto& m = out.manifest;
    m.session_id = spec.session_id;
    m.subject_id = spec.subject_id;
    m.audio_path = spec.session_id + ".wav";
    m.fps = spec.fps;
    m.n_frames = n_frames;
    m.lighting_tag = "synthetic";
    m.transcript_path = spec.session_id + ".transcript.json";
    m.truth_labels_path = spec.session_id + ".truth.csv";
    return out;
}

void write_session(const SynthSession& session, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& id = session.manifest.session_id;
    audio::write_wav_pcm16(dir / (id + ".wav"), session.track);
    stt::save_transcript(dir / (id + ".transcript.json"), session.transcript);
    annotate::save_labels(dir / (id + ".truth.csv"), session.truth.labels);
    annotate::save_timeline(dir / (id + ".truth.json"), session.truth.timeline);
}

std::vector<sessions::SessionManifest> generate_dataset(const SynthSpec& spec, std::size_t count,
                                                        const std::filesystem::path& dir) {
    std::vector<sessions::SessionManifest> manifests;
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < count; ++i) {
        SynthSpec s = spec;
        std::ostringstream sid;
        sid << "synth_" << std::setw(3) << std::setfill('0') << i;
        std::ostringstream subj;
        subj << "subject_" << std::setw(3) << std::setfill('0') << i;
        s.session_id = sid.str();
        s.subject_id = subj.str();
        s.seed = stream_seed(spec.seed, i);
        auto session = generate(s);
        write_session(session, dir);
        auto m = session.manifest;
        m.audio_path = dir / m.audio_path;
        m.transcript_path = dir / *m.transcript_path;
        m.truth_labels_path = dir / *m.truth_labels_path;
        manifests.push_back(std::move(m));
    }
    io::write_atomic(dir / "manifest.json", sessions::dataset_to_json(manifests, dir));
    return manifests;
}

SynthSpec spec_from_json(std::string_view text, const std::string& origin) {
    SynthSpec s;
    try {
        const auto doc = nlohmann::json::parse(text);
        s.n_zones = doc.value("n_zones", s.n_zones);
        s.fps = doc.value("fps", s.fps);
        s.sample_rate_hz = doc.value("sample_rate_hz", s.sample_rate_hz);
        s.duration_s = doc.value("duration_s", s.duration_s);
        s.burst_freq_hz = doc.value("burst_freq_hz", s.burst_freq_hz);
        s.burst_len_s = doc.value("burst_len_s", s.burst_len_s);
        s.gap_len_s = doc.value("gap_len_s", s.gap_len_s);
        s.noise_rms = doc.value("noise_rms", s.noise_rms);
        if (doc.contains("corruption")) {
            const auto& c = doc.at("corruption");
            s.miss_rate = c.value("miss_rate", s.miss_rate);
            s.substitute_rate = c.value("substitute_rate", s.substitute_rate);
            s.forced_misses = c.value("forced_misses", s.forced_misses);
        }
        s.token_confidence = doc.value("token_confidence", s.token_confidence);
        s.offset_frames = doc.value("offset_frames", s.offset_frames);
        s.seed = doc.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    s.validate();
    return s;
}

}  // namespace s2l::synth
