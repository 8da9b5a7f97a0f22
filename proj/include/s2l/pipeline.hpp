#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2l/annotate.hpp"
#include "s2l/refine.hpp"
#include "s2l/sessions.hpp"
#include "s2l/stt.hpp"

namespace s2l::pipeline {

/// Environment variable naming the external speech-to-text command.
inline constexpr const char* kSttCommandEnv = "S2L_STT_COMMAND";

enum class BackendKind { Auto, Sidecar, ToneSpotter, External };

/// Every tunable of the batch pipeline with its default.
struct PipelineConfig {
    double window_s = 0.25;
    double hop_s = 0.10;
    double band_lo_hz = 300.0;
    double band_hi_hz = 3000.0;
    double ratio_threshold = 0.5;
    audio::WindowFunction window = audio::WindowFunction::Hann;
    int offset_frames = 10;
    double min_confidence = 0.5;
    int transition_halfwidth = 10;
    std::size_t k = 9;
    std::uint64_t seed = 42;
    std::size_t max_iters = 300;
    std::size_t n_init = 10;
    bool corpus_wide = false;
    BackendKind backend = BackendKind::Auto;
    std::string stt_command;
    double stt_timeout_s = 300.0;
    std::size_t jobs = 1;

    /// Throws ArgumentError when a field violates its operation's precondition.
    void validate() const;
    audio::VoicingParams voicing() const;
};

/// Overlays keys present in a JSON config document onto `base`.
PipelineConfig config_from_json(std::string_view text, PipelineConfig base = {}, const std::string& origin = "<config>");
std::string config_to_json(const PipelineConfig& config);

BackendKind backend_from_string(std::string_view name);
std::string_view to_string(BackendKind kind);

struct SessionAnnotation {
    stt::Transcript transcript;
    MarkerTimeline aligned;
    MarkerTimeline rectified;
    std::vector<int> unresolved;
    FrameLabels labels;
};

/// Backend -> align -> rectify -> emit for one already-decoded session.
SessionAnnotation annotate_track(const sessions::SessionManifest& manifest, const audio::AudioTrack& track,
                                 const PipelineConfig& config);

/// Loads the session's WAV and runs annotate_track.
SessionAnnotation annotate_session(const sessions::SessionManifest& manifest, const PipelineConfig& config);

struct SessionStatus {
    std::string session_id;
    bool ok = false;
    std::string error;
    std::size_t detections = 0;
    std::vector<int> rectified_zones;
    std::vector<int> unresolved;
    std::size_t labeled_frames = 0;
};

struct BatchReport {
    std::vector<SessionStatus> sessions;
    bool all_ok() const;
    std::string to_json() const;
};

/// Annotates every session, writing `<id>.labels.csv` and `<id>.timeline.json`
/// into `out_dir`. Session failures are recorded, not thrown.
BatchReport annotate_dataset(const std::vector<sessions::SessionManifest>& manifests, const PipelineConfig& config,
                             const std::filesystem::path& out_dir);

struct RefineInputs {
    FrameLabels labels;
    refine::EmbeddingSet embeddings;
    std::optional<std::vector<bool>> blinks;
};

struct SessionRefinement {
    FrameLabels labels;
    refine::ReassignReport report;
    refine::ClusterZoneMap cluster_to_zone;
    std::size_t propagated = 0;
};

/// Per-session refinement: k-means over the labeled frames' embeddings, cluster
/// mapping, transition reassignment, then blink propagation.
SessionRefinement refine_session(const RefineInputs& inputs, const PipelineConfig& config);

/// Clusters all sessions together, then reassigns each with the shared model.
std::vector<SessionRefinement> refine_corpus(const std::vector<RefineInputs>& inputs, const PipelineConfig& config);

std::vector<bool> load_blinks(const std::filesystem::path& path, std::size_t n_frames);

/// Refines labels under `labels_dir`, writing `<id>.refined.csv` and
/// `<id>.refine.json` into `out_dir`.
BatchReport refine_dataset(const std::vector<sessions::SessionManifest>& manifests, const PipelineConfig& config,
                           const std::filesystem::path& labels_dir, const std::optional<std::filesystem::path>& embeddings_dir,
                           const std::optional<std::filesystem::path>& blinks_dir, const std::filesystem::path& out_dir);

}  // namespace s2l::pipeline
