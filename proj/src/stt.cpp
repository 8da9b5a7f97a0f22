#include "s2l/stt.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/log.hpp"

namespace s2l::stt {

using nlohmann::json;

std::string normalize_word(std::string_view word) {
    std::size_t b = 0;
    std::size_t e = word.size();
    auto edge = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
    while (b < e && edge(static_cast<unsigned char>(word[b]))) ++b;
    while (e > b && edge(static_cast<unsigned char>(word[e - 1]))) --e;
    std::string out(word.substr(b, e - b));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

KeywordSet::KeywordSet(std::vector<Entry> entries, double alias_penalty)
    : entries_(std::move(entries)), alias_penalty_(alias_penalty) {
    if (entries_.empty()) throw ArgumentError("keyword set is empty");
    if (!(alias_penalty_ > 0.0 && alias_penalty_ <= 1.0)) throw ArgumentError("alias penalty must lie in (0, 1]");
    for (auto& e : entries_) {
        e.canonical = normalize_word(e.canonical);
        for (auto& a : e.aliases) a = normalize_word(a);
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        for (std::size_t j = i + 1; j < entries_.size(); ++j) {
            if (entries_[i].canonical == entries_[j].canonical) {
                throw ArgumentError("duplicate canonical keyword '" + entries_[i].canonical + "'");
            }
        }
    }
}

KeywordSet KeywordSet::digits() {
    return KeywordSet({
        {"one", {"won"}},
        {"two", {"to", "too"}},
        {"three", {"tree"}},
        {"four", {"for", "fore"}},
        {"five", {}},
        {"six", {}},
        {"seven", {}},
        {"eight", {"ate"}},
        {"nine", {}},
    });
}

const KeywordSet::Entry& KeywordSet::entry(int zone) const {
    if (zone < 1 || zone > zone_count()) throw ArgumentError("zone " + std::to_string(zone) + " out of range");
    return entries_[static_cast<std::size_t>(zone - 1)];
}

KeywordSet::Match KeywordSet::match(int zone, std::string_view normalized) const {
    const auto& e = entry(zone);
    if (normalized == e.canonical) return Match::Canonical;
    if (std::find(e.aliases.begin(), e.aliases.end(), normalized) != e.aliases.end()) return Match::Alias;
    return Match::None;
}

// JSON -------------------------------------------------------------------------

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

double number_field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
    if (!it->is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
    return it->get<double>();
}

}  // namespace

Transcript parse_transcript(std::string_view json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ":" + std::to_string(line_of(json_text, e.byte)) + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError(origin + ": transcript must be a JSON object");

    Transcript t;
    const auto sid = doc.find("source_id");
    if (sid == doc.end() || !sid->is_string()) throw ParseError(origin + ": missing string field 'source_id'");
    t.source_id = sid->get<std::string>();
    const auto toks = doc.find("tokens");
    if (toks == doc.end() || !toks->is_array()) throw ParseError(origin + ": missing array field 'tokens'");

    for (std::size_t i = 0; i < toks->size(); ++i) {
        const auto& tok = (*toks)[i];
        const std::string where = origin + ": tokens[" + std::to_string(i) + "]";
        if (!tok.is_object()) throw ParseError(where + " must be an object");
        const auto text = tok.find("text");
        if (text == tok.end() || !text->is_string()) throw ParseError(where + ": missing string field 'text'");
        TranscriptToken token{text->get<std::string>(), number_field(tok, "start_s", where),
                              number_field(tok, "end_s", where), number_field(tok, "confidence", where)};
        if (!(token.end_s >= token.start_s)) throw ParseError(where + ": end_s < start_s");
        if (!(token.start_s >= 0.0)) throw ParseError(where + ": start_s must be non-negative");
        if (!(token.confidence >= 0.0 && token.confidence <= 1.0)) {
            throw ParseError(where + ": confidence outside [0, 1]");
        }
        t.tokens.push_back(std::move(token));
    }

    const auto by_start = [](const TranscriptToken& a, const TranscriptToken& b) { return a.start_s < b.start_s; };
    if (!std::is_sorted(t.tokens.begin(), t.tokens.end(), by_start)) {
        warn(origin + ": tokens not sorted by start_s; sorting");
        std::stable_sort(t.tokens.begin(), t.tokens.end(), by_start);
    }
    return t;
}

Transcript load_transcript(const std::filesystem::path& path) {
    return parse_transcript(io::read_text(path), path.string());
}

std::string transcript_to_json(const Transcript& transcript) {
    json doc;
    doc["source_id"] = transcript.source_id;
    doc["tokens"] = json::array();
    for (const auto& tok : transcript.tokens) {
        doc["tokens"].push_back(
            {{"text", tok.text}, {"start_s", tok.start_s}, {"end_s", tok.end_s}, {"confidence", tok.confidence}});
    }
    return doc.dump(2) + "\n";
}

void save_transcript(const std::filesystem::path& path, const Transcript& transcript) {
    io::write_atomic(path, transcript_to_json(transcript));
}

void check_within(const Transcript& transcript, double duration_s) {
    constexpr double kSlack = 1e-6;
    for (std::size_t i = 0; i < transcript.tokens.size(); ++i) {
        if (transcript.tokens[i].end_s > duration_s + kSlack) {
            throw ParseError("token " + std::to_string(i) + " ends after the audio (" + std::to_string(duration_s) +
                             " s)");
        }
    }
}

// Backends ---------------------------------------------------------------------

std::vector<std::string> split_command_line(std::string_view command) {
    std::vector<std::string> out;
    std::string cur;
    bool in_token = false;
    char quote = 0;
    for (char c : command) {
        if (quote != 0) {
            if (c == quote) {
                quote = 0;
            } else {
                cur += c;
            }
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (in_token) out.push_back(std::move(cur));
            cur.clear();
            in_token = false;
        } else {
            cur += c;
            in_token = true;
        }
    }
    if (quote != 0) throw ArgumentError("unterminated quote in command line");
    if (in_token) out.push_back(std::move(cur));
    return out;
}

namespace {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

CommandResult run_command(const std::vector<std::string>& argv, std::chrono::milliseconds timeout) {
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw BackendError("pipe() failed: " + std::string(std::strerror(errno)));

    const pid_t pid = fork();
    if (pid < 0) throw BackendError("fork() failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        const std::string msg = "exec failed: " + std::string(std::strerror(errno)) + "\n";
        [[maybe_unused]] auto n = write(STDERR_FILENO, msg.data(), msg.size());
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    CommandResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            result.timed_out = true;
            kill(pid, SIGKILL);
            break;
        }
        const int ready = poll(fds, 2, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
            const ssize_t n = read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                (i == 0 ? result.out : result.err).append(buf, static_cast<std::size_t>(n));
            } else {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    for (auto& f : fds) {
        if (f.fd >= 0) close(f.fd);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    return result;
}

const char* const kDigitWords[] = {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};

}  // namespace

std::string backend_id(const BackendConfig& backend) {
    struct Visitor {
        std::string operator()(const ExternalCommandBackend& b) const {
            return "external-command:" + (b.argv.empty() ? std::string() : b.argv.front());
        }
        std::string operator()(const SidecarBackend&) const { return "sidecar"; }
        std::string operator()(const ToneSpotterBackend&) const { return "tone-spotter"; }
    };
    return std::visit(Visitor{}, backend);
}

Transcript run_backend(const audio::AudioTrack& track, const BackendConfig& backend,
                       const std::optional<std::filesystem::path>& wav_path) {
    if (const auto* ext = std::get_if<ExternalCommandBackend>(&backend)) {
        if (ext->argv.empty()) throw ArgumentError("external-command backend has no command");
        if (!wav_path) throw ArgumentError("external-command backend needs the WAV path");
        auto argv = ext->argv;
        argv.push_back(wav_path->string());
        const auto res = run_command(argv, ext->timeout);
        if (res.timed_out) {
            throw BackendError("STT command '" + ext->argv.front() + "' timed out; stderr: " + res.err);
        }
        if (res.exit_code != 0) {
            throw BackendError("STT command '" + ext->argv.front() + "' exited with status " +
                               std::to_string(res.exit_code) + "; stderr: " + res.err);
        }
        auto t = parse_transcript(res.out, "stdout of " + ext->argv.front());
        check_within(t, track.duration_s());
        return t;
    }
    if (const auto* side = std::get_if<SidecarBackend>(&backend)) {
        if (!std::filesystem::exists(side->transcript_path)) {
            throw IoError("sidecar transcript missing: " + side->transcript_path.string());
        }
        auto t = load_transcript(side->transcript_path);
        check_within(t, track.duration_s());
        return t;
    }

    const auto& tone = std::get<ToneSpotterBackend>(backend);
    Transcript t;
    t.source_id = backend_id(backend);
    const auto segments = audio::voiced_segments(track, tone.voicing);
    const int limit = std::min<int>(tone.max_zones, 9);
    for (std::size_t i = 0; i < segments.size() && static_cast<int>(i) < limit; ++i) {
        t.tokens.push_back({kDigitWords[i], segments[i].start_s, segments[i].end_s, 1.0});
    }
    if (static_cast<int>(segments.size()) > limit) {
        warn("tone-spotter found " + std::to_string(segments.size()) + " bursts; kept the first " +
             std::to_string(limit));
    }
    return t;
}

}  // namespace s2l::stt
