#include "s2l/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/log.hpp"

namespace s2l {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Stt: return "stt";
        case Provenance::Rectified: return "rectified";
        case Provenance::Refined: return "refined";
        case Provenance::Propagated: return "propagated";
        case Provenance::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

Provenance provenance_from_string(std::string_view name) {
    if (name == "stt") return Provenance::Stt;
    if (name == "rectified") return Provenance::Rectified;
    if (name == "refined") return Provenance::Refined;
    if (name == "propagated") return Provenance::Propagated;
    if (name == "unlabeled") return Provenance::Unlabeled;
    throw ParseError("unknown provenance '" + std::string(name) + "'");
}

std::vector<int> MarkerTimeline::gaps() const {
    std::vector<int> out;
    auto it = detections.begin();
    for (int z = 1; z <= zone_count; ++z) {
        if (it != detections.end() && it->zone == z) {
            ++it;
        } else {
            out.push_back(z);
        }
    }
    return out;
}

void MarkerTimeline::validate() const {
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const auto& d = detections[i];
        if (d.zone < 1 || d.zone > zone_count) throw StructuralError("detection zone out of range");
        if (!(d.end_s >= d.start_s)) throw StructuralError("detection end before start");
        if (i > 0) {
            const auto& p = detections[i - 1];
            if (d.zone <= p.zone) throw StructuralError("detection zones not strictly increasing");
            if (d.start_s < p.end_s) throw StructuralError("detection intervals overlap or are out of order");
        }
    }
}

std::size_t FrameLabels::labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](const FrameLabel& l) { return l.zone != kUnlabeled; }));
}

}  // namespace s2l

namespace s2l::annotate {

using nlohmann::json;

MarkerTimeline align_keywords(const stt::Transcript& transcript, const stt::KeywordSet& keywords,
                              double min_confidence, std::string session_id) {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
        throw ArgumentError("min_confidence must lie in [0, 1]");
    }
    MarkerTimeline timeline;
    timeline.session_id = std::move(session_id);
    timeline.zone_count = keywords.zone_count();

    std::vector<std::string> words;
    words.reserve(transcript.tokens.size());
    for (const auto& tok : transcript.tokens) words.push_back(stt::normalize_word(tok.text));

    // Tokens at or after `next_token` that start no earlier than `prev_end` are eligible.
    std::size_t next_token = 0;
    double prev_end = -std::numeric_limits<double>::infinity();
    for (int zone = 1; zone <= keywords.zone_count(); ++zone) {
        for (std::size_t i = next_token; i < transcript.tokens.size(); ++i) {
            const auto& tok = transcript.tokens[i];
            if (tok.start_s < prev_end) continue;
            const auto m = keywords.match(zone, words[i]);
            if (m == stt::KeywordSet::Match::None) continue;
            const double conf = m == stt::KeywordSet::Match::Alias ? tok.confidence * keywords.alias_penalty()
                                                                   : tok.confidence;
            if (conf < min_confidence) continue;
            timeline.detections.push_back({zone, tok.start_s, tok.end_s, Provenance::Stt, conf});
            prev_end = tok.end_s;
            next_token = i + 1;
            break;
        }
    }
    return timeline;
}

RectifyResult rectify_gaps(const MarkerTimeline& timeline, const audio::AudioTrack& track,
                           const RectifyParams& params) {
    timeline.validate();
    RectifyResult result{timeline, {}};
    const auto missing = timeline.gaps();
    if (missing.empty()) return result;

    const auto segments = audio::voiced_segments(track, params.voicing);
    const auto& dets = timeline.detections;
    std::vector<MarkerDetection> recovered;

    std::size_t g = 0;
    while (g < missing.size()) {
        // Collect a run of consecutive missing zones.
        std::size_t run_end = g + 1;
        while (run_end < missing.size() && missing[run_end] == missing[run_end - 1] + 1) ++run_end;
        const int first_zone = missing[g];
        const int last_zone = missing[run_end - 1];

        double lo = 0.0;
        double hi = track.duration_s();
        for (const auto& d : dets) {
            if (d.zone < first_zone) lo = d.end_s;
            if (d.zone > last_zone) {
                hi = d.start_s;
                break;
            }
        }

        std::vector<MarkerDetection> candidates;
        for (const auto& s : segments) {
            const double mid = 0.5 * (s.start_s + s.end_s);
            if (mid <= lo || mid >= hi) continue;
            const double a = std::max(s.start_s, lo);
            const double b = std::min(s.end_s, hi);
            candidates.push_back({0, a, b, Provenance::Rectified, 1.0});
        }

        const std::size_t run_len = run_end - g;
        if (candidates.size() == run_len) {
            for (std::size_t i = 0; i < run_len; ++i) {
                candidates[i].zone = missing[g + i];
                recovered.push_back(candidates[i]);
            }
        } else {
            for (std::size_t i = g; i < run_end; ++i) result.unresolved.push_back(missing[i]);
        }
        g = run_end;
    }

    auto& out = result.timeline.detections;
    out.insert(out.end(), recovered.begin(), recovered.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.zone < b.zone; });
    result.timeline.validate();
    return result;
}

FrameLabels emit_frame_labels(const MarkerTimeline& timeline, double fps, std::size_t n_frames, int offset_frames) {
    if (!(fps > 0.0)) throw ArgumentError("fps must be positive");
    if (n_frames == 0) throw ArgumentError("n_frames must be positive");
    if (offset_frames < 0) throw ArgumentError("offset_frames must be non-negative");

    // Frame-time products such as (120/30)*30 land a hair off integers; the
    // tolerance keeps floor/ceil on the intended frame.
    constexpr double kFrameEps = 1e-6;
    struct Range {
        long long first;
        long long last;
        const MarkerDetection* det;
    };
    std::vector<Range> ranges;
    for (const auto& d : timeline.detections) {
        const long long first = static_cast<long long>(std::floor(d.start_s * fps + kFrameEps)) - offset_frames;
        const long long last = static_cast<long long>(std::ceil(d.end_s * fps - kFrameEps)) + offset_frames;
        ranges.push_back({first, last, &d});
    }

    for (std::size_t i = 1; i < ranges.size(); ++i) {
        auto& prev = ranges[i - 1];
        auto& cur = ranges[i];
        if (cur.first > prev.last) continue;
        const long long overlap = prev.last - cur.first + 1;
        const long long earlier_share = (overlap + 1) / 2;
        const long long split_last = cur.first + earlier_share - 1;
        cur.first = split_last + 1;
        prev.last = std::min(prev.last, split_last);
    }

    FrameLabels out;
    out.fps = fps;
    out.n_classes = timeline.zone_count;
    out.labels.assign(n_frames, FrameLabel{});
    const auto n = static_cast<long long>(n_frames);
    for (const auto& r : ranges) {
        if (r.last >= n) {
            std::ostringstream msg;
            msg << "session " << timeline.session_id << ": zone " << r.det->zone << " frames " << r.first << "-"
                << r.last << " exceed " << n_frames << " frames; clamped";
            warn(msg.str());
        }
        const long long a = std::max<long long>(r.first, 0);
        const long long b = std::min<long long>(r.last, n - 1);
        for (long long f = a; f <= b; ++f) {
            out.labels[static_cast<std::size_t>(f)] = {r.det->zone, r.det->provenance};
        }
    }
    return out;
}

// File formats -----------------------------------------------------------------

std::string labels_to_csv(const FrameLabels& labels) {
    std::string out = "frame,zone,provenance\n";
    out.reserve(labels.labels.size() * 16);
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const auto& l = labels.labels[i];
        out += std::to_string(i);
        out += ',';
        if (l.zone != kUnlabeled) out += std::to_string(l.zone);
        out += ',';
        out += to_string(l.zone == kUnlabeled ? Provenance::Unlabeled : l.provenance);
        out += '\n';
    }
    return out;
}

FrameLabels parse_labels_csv(std::string_view text, double fps, const std::string& origin) {
    FrameLabels out;
    out.fps = fps;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (header) {
            if (line != "frame,zone,provenance") throw ParseError(where + ": expected header 'frame,zone,provenance'");
            header = false;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos) throw ParseError(where + ": expected three columns");
        const std::string frame(line.substr(0, c1));
        const std::string zone(line.substr(c1 + 1, c2 - c1 - 1));
        const auto prov = line.substr(c2 + 1);
        try {
            if (std::stoull(frame) != out.labels.size()) throw ParseError(where + ": frames must be consecutive from 0");
            FrameLabel l;
            l.provenance = provenance_from_string(prov);
            if (!zone.empty()) {
                std::size_t used = 0;
                l.zone = std::stoi(zone, &used);
                if (used != zone.size() || l.zone < 1) throw ParseError(where + ": bad zone '" + zone + "'");
                out.n_classes = std::max(out.n_classes, l.zone);
            } else {
                l.provenance = Provenance::Unlabeled;
            }
            out.labels.push_back(l);
        } catch (const std::logic_error&) {
            throw ParseError(where + ": malformed row");
        }
    }
    if (header) throw ParseError(origin + ": empty label file");
    return out;
}

void save_labels(const std::filesystem::path& path, const FrameLabels& labels) {
    io::write_atomic(path, labels_to_csv(labels));
}

FrameLabels load_labels(const std::filesystem::path& path, double fps) {
    return parse_labels_csv(io::read_text(path), fps, path.string());
}

std::string timeline_to_json(const MarkerTimeline& timeline) {
    json doc;
    doc["session_id"] = timeline.session_id;
    doc["zone_count"] = timeline.zone_count;
    doc["detections"] = json::array();
    for (const auto& d : timeline.detections) {
        doc["detections"].push_back({{"zone", d.zone},
                                     {"start_s", d.start_s},
                                     {"end_s", d.end_s},
                                     {"provenance", std::string(to_string(d.provenance))},
                                     {"confidence", d.confidence}});
    }
    doc["gaps"] = timeline.gaps();
    return doc.dump(2) + "\n";
}

MarkerTimeline parse_timeline_json(std::string_view text, const std::string& origin) {
    MarkerTimeline t;
    try {
        const auto doc = json::parse(text);
        t.session_id = doc.value("session_id", std::string());
        t.zone_count = doc.value("zone_count", 9);
        for (const auto& d : doc.at("detections")) {
            t.detections.push_back({d.at("zone").get<int>(), d.at("start_s").get<double>(), d.at("end_s").get<double>(),
                                    provenance_from_string(d.at("provenance").get<std::string>()),
                                    d.value("confidence", 1.0)});
        }
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    t.validate();
    return t;
}

void save_timeline(const std::filesystem::path& path, const MarkerTimeline& timeline) {
    io::write_atomic(path, timeline_to_json(timeline));
}

MarkerTimeline load_timeline(const std::filesystem::path& path) {
    return parse_timeline_json(io::read_text(path), path.string());
}

}  // namespace s2l::annotate
