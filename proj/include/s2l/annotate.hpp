#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "s2l/audio.hpp"
#include "s2l/stt.hpp"

namespace s2l {

/// Zone value for frames that carry no label.
inline constexpr int kUnlabeled = 0;

enum class Provenance { Stt, Rectified, Refined, Propagated, Unlabeled };

std::string_view to_string(Provenance p);
/// Throws ParseError on unknown names.
Provenance provenance_from_string(std::string_view name);

struct MarkerDetection {
    int zone = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    Provenance provenance = Provenance::Stt;
    double confidence = 1.0;
};

/// Detections in strictly ascending zone and time order. Zones that were not
/// found are absent; gaps() lists them.
struct MarkerTimeline {
    std::string session_id;
    int zone_count = 9;
    std::vector<MarkerDetection> detections;

    std::vector<int> gaps() const;
    /// Throws StructuralError unless zones strictly increase and intervals are
    /// time-ordered and non-overlapping.
    void validate() const;
};

struct FrameLabel {
    int zone = kUnlabeled;
    Provenance provenance = Provenance::Unlabeled;

    friend bool operator==(const FrameLabel&, const FrameLabel&) = default;
};

/// One label per video frame.
struct FrameLabels {
    double fps = 30.0;
    int n_classes = 9;
    std::vector<FrameLabel> labels;

    std::size_t n_frames() const { return labels.size(); }
    std::size_t labeled_count() const;
};

}  // namespace s2l

namespace s2l::annotate {

struct RectifyParams {
    audio::VoicingParams voicing{};
};

struct RectifyResult {
    MarkerTimeline timeline;
    std::vector<int> unresolved;
};

/// Greedy in-order scan: zone z takes the earliest matching token starting after the
/// previously selected token's end, with (penalized) confidence >= min_confidence.
MarkerTimeline align_keywords(const stt::Transcript& transcript, const stt::KeywordSet& keywords,
                              double min_confidence, std::string session_id = {});

/// Fills gaps from voiced segments found between the neighbouring detections.
/// A run of m consecutive missing zones is filled only when exactly m candidate
/// segments lie in its search interval.
RectifyResult rectify_gaps(const MarkerTimeline& timeline, const audio::AudioTrack& track,
                           const RectifyParams& params);

/// Paints each detection over [floor(start*fps) - offset, ceil(end*fps) + offset],
/// splitting overlaps between consecutive detections at the midpoint.
FrameLabels emit_frame_labels(const MarkerTimeline& timeline, double fps, std::size_t n_frames, int offset_frames);

// File formats -----------------------------------------------------------------

/// CSV with header `frame,zone,provenance`; unlabeled zones are empty.
std::string labels_to_csv(const FrameLabels& labels);
FrameLabels parse_labels_csv(std::string_view text, double fps, const std::string& origin = "<labels>");
void save_labels(const std::filesystem::path& path, const FrameLabels& labels);
FrameLabels load_labels(const std::filesystem::path& path, double fps = 30.0);

std::string timeline_to_json(const MarkerTimeline& timeline);
MarkerTimeline parse_timeline_json(std::string_view text, const std::string& origin = "<timeline>");
void save_timeline(const std::filesystem::path& path, const MarkerTimeline& timeline);
MarkerTimeline load_timeline(const std::filesystem::path& path);

}  // namespace s2l::annotate
