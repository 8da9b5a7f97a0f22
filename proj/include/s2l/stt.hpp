#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "s2l/audio.hpp"

namespace s2l::stt {

struct TranscriptToken {
    std::string text;
    double start_s = 0.0;
    double end_s = 0.0;
    double confidence = 1.0;
};

/// Time-ordered tokens from one backend run.
struct Transcript {
    std::string source_id;
    std::vector<TranscriptToken> tokens;
};

/// Lowercases ASCII letters and drops surrounding whitespace and punctuation.
std::string normalize_word(std::string_view word);

/// Zone index -> canonical keyword plus aliases. Zones are 1..size().
class KeywordSet {
public:
    struct Entry {
        std::string canonical;
        std::vector<std::string> aliases;
    };

    /// Throws ArgumentError if canonical keywords repeat or the list is empty.
    explicit KeywordSet(std::vector<Entry> entries, double alias_penalty = kDefaultAliasPenalty);

    /// "one".."nine" with the default homophone alias table.
    static KeywordSet digits();

    int zone_count() const { return static_cast<int>(entries_.size()); }
    const Entry& entry(int zone) const;
    const std::string& canonical(int zone) const { return entry(zone).canonical; }
    double alias_penalty() const { return alias_penalty_; }

    enum class Match { None, Canonical, Alias };
    /// Matches an already-normalized token text against the keyword for `zone`.
    Match match(int zone, std::string_view normalized) const;

    static constexpr double kDefaultAliasPenalty = 0.9;

private:
    std::vector<Entry> entries_;
    double alias_penalty_;
};

// Transcript JSON ------------------------------------------------------------

/// Parses and validates transcript JSON text. `origin` labels error messages.
/// Unsorted tokens are sorted by start time with a warning.
Transcript parse_transcript(std::string_view json_text, const std::string& origin = "<transcript>");
Transcript load_transcript(const std::filesystem::path& path);
std::string transcript_to_json(const Transcript& transcript);
void save_transcript(const std::filesystem::path& path, const Transcript& transcript);

/// Throws ParseError if any token violates end >= start, confidence in [0,1], or
/// ends past `duration_s`.
void check_within(const Transcript& transcript, double duration_s);

// Backends -------------------------------------------------------------------

/// Spawns `argv` with the WAV path appended; stdout must be transcript JSON.
struct ExternalCommandBackend {
    std::vector<std::string> argv;
    std::chrono::milliseconds timeout{std::chrono::seconds(300)};
};

/// Reads a transcript file that accompanies the audio.
struct SidecarBackend {
    std::filesystem::path transcript_path;
};

/// Emits one digit token per voice-band tone burst, in ascending zone order.
struct ToneSpotterBackend {
    audio::VoicingParams voicing{};
    int max_zones = 9;
};

using BackendConfig = std::variant<ExternalCommandBackend, SidecarBackend, ToneSpotterBackend>;

/// Runs a backend for one session. `wav_path` is required for the external
/// command backend (it receives the file, not the decoded samples).
Transcript run_backend(const audio::AudioTrack& track, const BackendConfig& backend,
                       const std::optional<std::filesystem::path>& wav_path = std::nullopt);

/// Name recorded as the transcript's source_id for a backend.
std::string backend_id(const BackendConfig& backend);

/// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command_line(std::string_view command);

}  // namespace s2l::stt
