#include "s2l/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "s2l/error.hpp"

namespace s2l::audio {

AudioTrack::AudioTrack(std::vector<double> samples, int sample_rate_hz, int source_channels)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), source_channels_(source_channels) {
    if (sample_rate_hz_ < kMinSampleRateHz) {
        throw ArgumentError("sample rate " + std::to_string(sample_rate_hz_) + " Hz is below " +
                            std::to_string(kMinSampleRateHz) + " Hz");
    }
    if (source_channels_ < 1) throw ArgumentError("source_channels must be >= 1");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const double s = samples_[i];
        if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
            throw ArgumentError("sample " + std::to_string(i) + " outside [-1, 1]");
        }
    }
}

AudioTrack to_mono(std::span<const std::vector<double>> channels, int sample_rate_hz) {
    if (channels.empty()) throw StructuralError("to_mono: no channels");
    const std::size_t n = channels.front().size();
    for (const auto& ch : channels) {
        if (ch.size() != n) throw StructuralError("to_mono: channel lengths differ");
    }
    if (channels.size() == 1) return AudioTrack(channels.front(), sample_rate_hz, 1);

    std::vector<double> mono(n, 0.0);
    for (const auto& ch : channels) {
        for (std::size_t i = 0; i < n; ++i) mono[i] += ch[i];
    }
    const double inv = 1.0 / static_cast<double>(channels.size());
    for (auto& s : mono) s *= inv;
    return AudioTrack(std::move(mono), sample_rate_hz, static_cast<int>(channels.size()));
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::span<std::complex<double>> data) {
    const std::size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ArgumentError("fft size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> step(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = data[i + k];
                const auto v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= step;
            }
        }
    }
}

namespace {

struct SampleRange {
    std::size_t first;
    std::size_t count;
};

SampleRange resolve_range(const AudioTrack& track, double start_s, double duration_s) {
    if (!(duration_s > 0.0) || !(start_s >= 0.0)) {
        throw RangeError("window start/duration must be non-negative/positive");
    }
    const double fs = track.sample_rate_hz();
    const auto first = static_cast<std::size_t>(std::llround(start_s * fs));
    const auto count = static_cast<std::size_t>(std::llround(duration_s * fs));
    if (count < kMinWindowSamples) {
        throw RangeError("window holds " + std::to_string(count) + " samples; need at least " +
                         std::to_string(kMinWindowSamples));
    }
    if (first + count > track.size()) {
        std::ostringstream msg;
        msg << "window [" << start_s << ", " << start_s + duration_s << ") s exceeds track length "
            << track.duration_s() << " s";
        throw RangeError(msg.str());
    }
    return {first, count};
}

std::vector<SpectrumBin> spectrum_of(std::span<const double> segment, int sample_rate_hz, WindowFunction window) {
    const std::size_t n = segment.size();
    const std::size_t padded = next_pow2(n);
    std::vector<std::complex<double>> buf(padded, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        if (window == WindowFunction::Hann && n > 1) {
            w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
        }
        buf[i] = {segment[i] * w, 0.0};
    }
    fft_inplace(buf);

    std::vector<SpectrumBin> bins(padded / 2 + 1);
    const double df = static_cast<double>(sample_rate_hz) / static_cast<double>(padded);
    for (std::size_t k = 0; k < bins.size(); ++k) {
        bins[k] = {static_cast<double>(k) * df, std::abs(buf[k])};
    }
    return bins;
}

}  // namespace

std::vector<SpectrumBin> magnitude_spectrum(const AudioTrack& track, double start_s, double duration_s,
                                            WindowFunction window) {
    const auto range = resolve_range(track, start_s, duration_s);
    return spectrum_of(track.samples().subspan(range.first, range.count), track.sample_rate_hz(), window);
}

AnalysisWindow analyze_window(const AudioTrack& track, double start_s, double duration_s, Band band,
                              WindowFunction window) {
    const double nyquist = track.sample_rate_hz() / 2.0;
    if (!(band.lo_hz >= 0.0) || !(band.lo_hz < band.hi_hz) || band.hi_hz > nyquist) {
        throw ArgumentError("invalid band; need 0 <= lo < hi <= Nyquist");
    }
    const auto bins = magnitude_spectrum(track, start_s, duration_s, window);

    double total = 0.0;
    double in_band = 0.0;
    double peak = -1.0;
    double dominant = 0.0;
    for (std::size_t k = 1; k < bins.size(); ++k) {
        const double e = bins[k].magnitude * bins[k].magnitude;
        total += e;
        if (bins[k].freq_hz >= band.lo_hz && bins[k].freq_hz <= band.hi_hz) in_band += e;
        if (bins[k].magnitude > peak) {
            peak = bins[k].magnitude;
            dominant = bins[k].freq_hz;
        }
    }
    AnalysisWindow out{start_s, duration_s, 0.0, 0.0};
    if (total > 0.0) {
        out.dominant_freq_hz = dominant;
        out.band_energy_ratio = std::clamp(in_band / total, 0.0, 1.0);
    }
    return out;
}

std::vector<VoicedSegment> voiced_segments(const AudioTrack& track, const VoicingParams& params) {
    if (!(params.hop_s > 0.0) || params.hop_s > params.window_s) {
        throw ArgumentError("voiced_segments: need 0 < hop_s <= window_s");
    }
    if (!(params.ratio_threshold >= 0.0 && params.ratio_threshold <= 1.0)) {
        throw ArgumentError("voiced_segments: ratio_threshold must lie in [0, 1]");
    }
    const double nyquist = track.sample_rate_hz() / 2.0;
    if (!(params.band.lo_hz >= 0.0) || !(params.band.lo_hz < params.band.hi_hz) || params.band.hi_hz > nyquist) {
        throw ArgumentError("voiced_segments: invalid band");
    }

    std::vector<VoicedSegment> segments;
    std::size_t merged_windows = 0;
    double ratio_sum = 0.0;
    const double duration = track.duration_s();
    constexpr double kEps = 1e-9;

    for (std::size_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * params.hop_s;
        if (start + params.window_s > duration + kEps) break;
        const auto w = analyze_window(track, start, params.window_s, params.band, params.window);
        const bool pass = w.band_energy_ratio > 0.0 && w.dominant_freq_hz >= params.band.lo_hz &&
                          w.dominant_freq_hz <= params.band.hi_hz && w.band_energy_ratio >= params.ratio_threshold;
        if (!pass) continue;
        const double end = start + params.window_s;
        if (!segments.empty() && start <= segments.back().end_s + kEps) {
            segments.back().end_s = end;
            ratio_sum += w.band_energy_ratio;
            ++merged_windows;
            segments.back().mean_band_ratio = ratio_sum / static_cast<double>(merged_windows);
        } else {
            segments.push_back({start, end, w.band_energy_ratio});
            ratio_sum = w.band_energy_ratio;
            merged_windows = 1;
        }
    }
    return segments;
}

// WAV ------------------------------------------------------------------------

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = path.string() + ": ";
    if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
        std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
        throw ParseError(where + "not a RIFF/WAVE file");
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::string id(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                             bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4));
        const std::size_t len = read_u32(&bytes[pos + 4]);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min(len, bytes.size() - body);
        if (id == "fmt ") {
            if (avail < 16) throw ParseError(where + "truncated fmt chunk");
            format = read_u16(&bytes[body]);
            channels = read_u16(&bytes[body + 2]);
            rate = read_u32(&bytes[body + 4]);
            bits = read_u16(&bytes[body + 14]);
            if (format == kFormatExtensible && avail >= 26) format = read_u16(&bytes[body + 24]);
            have_fmt = true;
        } else if (id == "data") {
            data = &bytes[body];
            data_len = avail;
        }
        pos = body + len + (len & 1);
    }
    if (!have_fmt) throw ParseError(where + "missing fmt chunk");
    if (data == nullptr) throw ParseError(where + "missing data chunk");
    if (format != kFormatPcm && format != kFormatFloat) {
        std::ostringstream msg;
        msg << where << "unsupported WAV format tag 0x" << std::hex << format << " (only PCM and IEEE float)";
        throw ParseError(msg.str());
    }
    const bool ok_bits = format == kFormatFloat ? bits == 32 : (bits == 8 || bits == 16 || bits == 24 || bits == 32);
    if (!ok_bits) throw ParseError(where + "unsupported bits per sample " + std::to_string(bits));
    if (channels == 0) throw ParseError(where + "zero channels");

    const std::size_t bytes_per = bits / 8;
    const std::size_t frames = data_len / (bytes_per * channels);
    WavData out;
    out.sample_rate_hz = static_cast<int>(rate);
    out.bits_per_sample = bits;
    out.channels.assign(channels, std::vector<double>(frames));
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (f * channels + c) * bytes_per;
            double v = 0.0;
            if (format == kFormatFloat) {
                const std::uint32_t raw = read_u32(p);
                float fv;
                static_assert(sizeof(float) == 4);
                std::memcpy(&fv, &raw, 4);
                v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
            } else if (bits == 8) {
                v = (static_cast<double>(p[0]) - 128.0) / 128.0;
            } else if (bits == 16) {
                v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
            }
            out.channels[c][f] = v;
        }
    }
    return out;
}

AudioTrack load_wav(const std::filesystem::path& path) {
    auto wav = read_wav(path);
    return to_mono(wav.channels, wav.sample_rate_hz);
}

void write_wav_pcm16(const std::filesystem::path& path, const AudioTrack& track) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write WAV file " + path.string());
    auto put32 = [&](std::uint32_t v) {
        const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
        out.write(b, 4);
    };
    auto put16 = [&](std::uint16_t v) {
        const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
        out.write(b, 2);
    };
    const auto n = static_cast<std::uint32_t>(track.size());
    const auto rate = static_cast<std::uint32_t>(track.sample_rate_hz());
    out.write("RIFF", 4);
    put32(36 + n * 2);
    out.write("WAVEfmt ", 8);
    put32(16);
    put16(kFormatPcm);
    put16(1);
    put32(rate);
    put32(rate * 2);
    put16(2);
    put16(16);
    out.write("data", 4);
    put32(n * 2);
    for (double s : track.samples()) {
        const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32767.0);
        put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    if (!out) throw IoError("failed writing WAV file " + path.string());
}

}  // namespace s2l::audio
