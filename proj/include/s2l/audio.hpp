#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace s2l::audio {

/// Immutable mono PCM buffer.
class AudioTrack {
public:
    /// Validates sample range and rate; throws ArgumentError on violation.
    AudioTrack(std::vector<double> samples, int sample_rate_hz, int source_channels = 1);

    std::span<const double> samples() const { return samples_; }
    int sample_rate_hz() const { return sample_rate_hz_; }
    int source_channels() const { return source_channels_; }
    std::size_t size() const { return samples_.size(); }
    double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

private:
    std::vector<double> samples_;
    int sample_rate_hz_;
    int source_channels_;
};

inline constexpr int kMinSampleRateHz = 8000;
inline constexpr std::size_t kMinWindowSamples = 16;

enum class WindowFunction { Rectangular, Hann };

struct SpectrumBin {
    double freq_hz;
    double magnitude;
};

struct AnalysisWindow {
    double start_s;
    double duration_s;
    double dominant_freq_hz;
    double band_energy_ratio;
};

struct VoicedSegment {
    double start_s;
    double end_s;
    double mean_band_ratio;
};

struct Band {
    double lo_hz = 300.0;
    double hi_hz = 3000.0;
};

struct VoicingParams {
    double window_s = 0.25;
    double hop_s = 0.10;
    Band band{};
    double ratio_threshold = 0.5;
    WindowFunction window = WindowFunction::Hann;
};

/// Averages channels sample-by-sample. Throws StructuralError on empty or ragged input.
AudioTrack to_mono(std::span<const std::vector<double>> channels, int sample_rate_hz);

/// Magnitude spectrum of the tapered segment [start_s, start_s + duration_s).
/// The segment is zero-padded to the next power of two; bins run 0..Nyquist of
/// the padded length.
std::vector<SpectrumBin> magnitude_spectrum(const AudioTrack& track, double start_s, double duration_s,
                                            WindowFunction window = WindowFunction::Hann);

/// Dominant frequency and in-band energy fraction of one window. The zero-frequency
/// bin is excluded from both.
AnalysisWindow analyze_window(const AudioTrack& track, double start_s, double duration_s, Band band,
                              WindowFunction window = WindowFunction::Hann);

/// Scans the track with a sliding window and merges passing windows into maximal segments.
std::vector<VoicedSegment> voiced_segments(const AudioTrack& track, const VoicingParams& params);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::span<std::complex<double>> data);

std::size_t next_pow2(std::size_t n);

// WAV I/O -------------------------------------------------------------------

/// Decoded interleaved-free channel data straight from a RIFF file.
struct WavData {
    std::vector<std::vector<double>> channels;
    int sample_rate_hz = 0;
    int bits_per_sample = 0;
};

/// Reads little-endian RIFF/WAVE with PCM 8/16/24/32-bit integer or 32-bit float
/// samples. Other format tags raise ParseError naming the tag.
WavData read_wav(const std::filesystem::path& path);

/// Reads and mixes down to mono.
AudioTrack load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono.
void write_wav_pcm16(const std::filesystem::path& path, const AudioTrack& track);

}  // namespace s2l::audio
