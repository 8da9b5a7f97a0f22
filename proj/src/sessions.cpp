#include "s2l/sessions.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/rng.hpp"

namespace s2l::sessions {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing required field '" + key + "'");
    return *it;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> optional_path(const json& obj, const char* key,
                                                   const std::filesystem::path& base, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(where + ": field '" + key + "' must be a string");
    return resolve(base, it->get<std::string>());
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (base.empty()) return p.generic_string();
    const auto rel = p.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") return p.generic_string();
    return rel.generic_string();
}

}  // namespace

std::vector<SessionManifest> parse_dataset(std::string_view json_text, const std::filesystem::path& base_dir,
                                           const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    const auto& list = require(doc, "sessions", origin);
    if (!list.is_array()) throw ParseError(origin + ": 'sessions' must be an array");

    std::vector<SessionManifest> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& s = list[i];
        const std::string where = origin + ": sessions[" + std::to_string(i) + "]";
        try {
            SessionManifest m;
            m.session_id = require(s, "session_id", where).get<std::string>();
            m.subject_id = require(s, "subject_id", where).get<std::string>();
            m.audio_path = resolve(base_dir, require(s, "audio_path", where).get<std::string>());
            const auto& video = require(s, "video", where);
            m.fps = require(video, "fps", where + ".video").get<double>();
            const auto frames = require(video, "n_frames", where + ".video").get<long long>();
            m.lighting_tag = s.value("lighting_tag", std::string());
            m.wears_glasses = s.value("wears_glasses", false);
            m.transcript_path = optional_path(s, "transcript_path", base_dir, where);
            m.truth_labels_path = optional_path(s, "truth_labels_path", base_dir, where);
            m.embeddings_path = optional_path(s, "embeddings_path", base_dir, where);
            m.blinks_path = optional_path(s, "blinks_path", base_dir, where);
            if (!(m.fps > 0.0)) throw ParseError(where + ": video.fps must be positive");
            if (frames <= 0) throw ParseError(where + ": video.n_frames must be positive");
            m.n_frames = static_cast<std::size_t>(frames);
            if (!seen.insert(m.session_id).second) {
                throw StructuralError(where + ": duplicate session_id '" + m.session_id + "'");
            }
            out.push_back(std::move(m));
        } catch (const json::type_error& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

std::vector<SessionManifest> load_dataset(const std::filesystem::path& path) {
    return parse_dataset(io::read_text(path), path.parent_path(), path.string());
}

std::string dataset_to_json(const std::vector<SessionManifest>& sessions, const std::filesystem::path& base_dir) {
    json list = json::array();
    for (const auto& m : sessions) {
        json s = {{"session_id", m.session_id},
                  {"subject_id", m.subject_id},
                  {"audio_path", relative_to(m.audio_path, base_dir)},
                  {"video", {{"fps", m.fps}, {"n_frames", m.n_frames}}},
                  {"lighting_tag", m.lighting_tag},
                  {"wears_glasses", m.wears_glasses}};
        if (m.transcript_path) s["transcript_path"] = relative_to(*m.transcript_path, base_dir);
        if (m.truth_labels_path) s["truth_labels_path"] = relative_to(*m.truth_labels_path, base_dir);
        if (m.embeddings_path) s["embeddings_path"] = relative_to(*m.embeddings_path, base_dir);
        if (m.blinks_path) s["blinks_path"] = relative_to(*m.blinks_path, base_dir);
        list.push_back(std::move(s));
    }
    return json{{"sessions", list}}.dump(2) + "\n";
}

std::string_view to_string(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Val: return "val";
        case Partition::Test: return "test";
    }
    return "train";
}

DatasetSplit split_subject_ids(std::vector<std::string> subjects, SplitFractions fractions, std::uint64_t seed) {
    const double sum = fractions.train + fractions.val + fractions.test;
    if (fractions.train < 0.0 || fractions.val < 0.0 || fractions.test < 0.0 || std::abs(sum - 1.0) > 1e-9) {
        throw ArgumentError("split fractions must be non-negative and sum to 1");
    }
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    const std::size_t nonzero = (fractions.train > 0.0) + (fractions.val > 0.0) + (fractions.test > 0.0);
    if (subjects.size() < nonzero) {
        throw ArgumentError("need at least " + std::to_string(nonzero) + " subjects for the requested partitions");
    }

    SplitMix64 rng(seed);
    for (std::size_t i = subjects.size(); i > 1; --i) {
        std::swap(subjects[i - 1], subjects[rng.below(i)]);
    }
    const auto n = static_cast<double>(subjects.size());
    const auto n_val = static_cast<std::size_t>(std::llround(fractions.val * n));
    const auto n_test = std::min(subjects.size() - n_val, static_cast<std::size_t>(std::llround(fractions.test * n)));
    const std::size_t n_train = subjects.size() - n_val - n_test;

    DatasetSplit split;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        split[subjects[i]] = i < n_train ? Partition::Train : (i < n_train + n_val ? Partition::Val : Partition::Test);
    }
    return split;
}

DatasetSplit split_subjects(const std::vector<SessionManifest>& manifests, SplitFractions fractions,
                            std::uint64_t seed) {
    std::vector<std::string> subjects;
    subjects.reserve(manifests.size());
    for (const auto& m : manifests) subjects.push_back(m.subject_id);
    return split_subject_ids(std::move(subjects), fractions, seed);
}

std::string split_to_json(const DatasetSplit& split) {
    json doc = json::object();
    for (const auto& [subject, part] : split) doc[subject] = std::string(to_string(part));
    return doc.dump(2) + "\n";
}

}  // namespace s2l::sessions
