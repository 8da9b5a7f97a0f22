#include "s2l/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/io.hpp"

namespace s2l::pipeline {

using nlohmann::json;

void PipelineConfig::validate() const {
    if (!(hop_s > 0.0) || hop_s > window_s) throw ArgumentError("need 0 < hop_s <= window_s");
    if (!(band_lo_hz >= 0.0) || !(band_lo_hz < band_hi_hz)) throw ArgumentError("need 0 <= band_lo < band_hi");
    if (!(ratio_threshold >= 0.0 && ratio_threshold <= 1.0)) throw ArgumentError("ratio_threshold must lie in [0, 1]");
    if (offset_frames < 0) throw ArgumentError("offset_frames must be non-negative");
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ArgumentError("min_confidence must lie in [0, 1]");
    if (transition_halfwidth < 0) throw ArgumentError("transition_halfwidth must be non-negative");
    if (k < 1) throw ArgumentError("k must be >= 1");
    if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");
    if (n_init < 1) throw ArgumentError("n_init must be >= 1");
    if (!(stt_timeout_s > 0.0)) throw ArgumentError("stt_timeout_s must be positive");
    if (jobs < 1) throw ArgumentError("jobs must be >= 1");
}

audio::VoicingParams PipelineConfig::voicing() const {
    return {window_s, hop_s, {band_lo_hz, band_hi_hz}, ratio_threshold, window};
}

BackendKind backend_from_string(std::string_view name) {
    if (name == "auto") return BackendKind::Auto;
    if (name == "sidecar") return BackendKind::Sidecar;
    if (name == "tone-spotter") return BackendKind::ToneSpotter;
    if (name == "external") return BackendKind::External;
    throw ArgumentError("unknown backend '" + std::string(name) + "' (auto|sidecar|tone-spotter|external)");
}

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Auto: return "auto";
        case BackendKind::Sidecar: return "sidecar";
        case BackendKind::ToneSpotter: return "tone-spotter";
        case BackendKind::External: return "external";
    }
    return "auto";
}

PipelineConfig config_from_json(std::string_view text, PipelineConfig c, const std::string& origin) {
    try {
        const auto doc = json::parse(text);
        c.window_s = doc.value("window_s", c.window_s);
        c.hop_s = doc.value("hop_s", c.hop_s);
        if (doc.contains("band")) {
            const auto& b = doc.at("band");
            c.band_lo_hz = b.at(0).get<double>();
            c.band_hi_hz = b.at(1).get<double>();
        }
        c.ratio_threshold = doc.value("ratio_threshold", c.ratio_threshold);
        if (doc.contains("window_function")) {
            const auto w = doc.at("window_function").get<std::string>();
            if (w == "hann") {
                c.window = audio::WindowFunction::Hann;
            } else if (w == "rectangular") {
                c.window = audio::WindowFunction::Rectangular;
            } else {
                throw ParseError(origin + ": window_function must be 'hann' or 'rectangular'");
            }
        }
        c.offset_frames = doc.value("offset_frames", c.offset_frames);
        c.min_confidence = doc.value("min_confidence", c.min_confidence);
        c.transition_halfwidth = doc.value("transition_halfwidth", c.transition_halfwidth);
        c.k = doc.value("k", c.k);
        c.seed = doc.value("seed", c.seed);
        c.max_iters = doc.value("max_iters", c.max_iters);
        c.n_init = doc.value("n_init", c.n_init);
        c.corpus_wide = doc.value("corpus_wide", c.corpus_wide);
        if (doc.contains("backend")) c.backend = backend_from_string(doc.at("backend").get<std::string>());
        c.stt_command = doc.value("stt_command", c.stt_command);
        c.stt_timeout_s = doc.value("stt_timeout_s", c.stt_timeout_s);
        c.jobs = doc.value("jobs", c.jobs);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return c;
}

std::string config_to_json(const PipelineConfig& c) {
    json doc = {{"window_s", c.window_s},
                {"hop_s", c.hop_s},
                {"band", {c.band_lo_hz, c.band_hi_hz}},
                {"ratio_threshold", c.ratio_threshold},
                {"window_function", c.window == audio::WindowFunction::Hann ? "hann" : "rectangular"},
                {"offset_frames", c.offset_frames},
                {"min_confidence", c.min_confidence},
                {"transition_halfwidth", c.transition_halfwidth},
                {"k", c.k},
                {"seed", c.seed},
                {"max_iters", c.max_iters},
                {"n_init", c.n_init},
                {"corpus_wide", c.corpus_wide},
                {"backend", std::string(to_string(c.backend))},
                {"stt_command", c.stt_command},
                {"stt_timeout_s", c.stt_timeout_s},
                {"jobs", c.jobs}};
    return doc.dump(2) + "\n";
}

namespace {

stt::BackendConfig resolve_backend(const sessions::SessionManifest& m, const PipelineConfig& config) {
    std::string command = config.stt_command;
    if (command.empty()) {
        if (const char* env = std::getenv(kSttCommandEnv)) command = env;
    }
    auto external = [&]() -> stt::BackendConfig {
        if (command.empty()) {
            throw ArgumentError(std::string("no STT command configured (set --stt-command or ") + kSttCommandEnv + ")");
        }
        return stt::ExternalCommandBackend{
            stt::split_command_line(command),
            std::chrono::milliseconds(static_cast<long long>(config.stt_timeout_s * 1000.0))};
    };
    switch (config.backend) {
        case BackendKind::Sidecar:
            if (!m.transcript_path) throw ArgumentError("session " + m.session_id + " has no transcript_path");
            return stt::SidecarBackend{*m.transcript_path};
        case BackendKind::ToneSpotter:
            return stt::ToneSpotterBackend{config.voicing(), 9};
        case BackendKind::External:
            return external();
        case BackendKind::Auto:
            if (m.transcript_path) return stt::SidecarBackend{*m.transcript_path};
            return external();
    }
    throw ArgumentError("unreachable backend kind");
}

template <typename Fn>
void run_parallel(std::size_t count, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace

SessionAnnotation annotate_track(const sessions::SessionManifest& m, const audio::AudioTrack& track,
                                 const PipelineConfig& config) {
    config.validate();
    SessionAnnotation out;
    out.transcript = stt::run_backend(track, resolve_backend(m, config), m.audio_path);
    out.aligned = annotate::align_keywords(out.transcript, stt::KeywordSet::digits(), config.min_confidence, m.session_id);
    auto rect = annotate::rectify_gaps(out.aligned, track, {config.voicing()});
    out.rectified = std::move(rect.timeline);
    out.unresolved = std::move(rect.unresolved);
    out.labels = annotate::emit_frame_labels(out.rectified, m.fps, m.n_frames, config.offset_frames);
    return out;
}

SessionAnnotation annotate_session(const sessions::SessionManifest& m, const PipelineConfig& config) {
    if (!std::filesystem::exists(m.audio_path)) throw IoError("audio file missing: " + m.audio_path.string());
    return annotate_track(m, audio::load_wav(m.audio_path), config);
}

bool BatchReport::all_ok() const {
    return std::all_of(sessions.begin(), sessions.end(), [](const SessionStatus& s) { return s.ok; });
}

std::string BatchReport::to_json() const {
    json list = json::array();
    std::size_t failed = 0;
    for (const auto& s : sessions) {
        json e = {{"session_id", s.session_id}, {"ok", s.ok}};
        if (s.ok) {
            e["detections"] = s.detections;
            e["rectified_zones"] = s.rectified_zones;
            e["unresolved_zones"] = s.unresolved;
            e["labeled_frames"] = s.labeled_frames;
        } else {
            e["error"] = s.error;
            ++failed;
        }
        list.push_back(std::move(e));
    }
    return json{{"sessions", list}, {"failed", failed}, {"total", sessions.size()}}.dump(2) + "\n";
}

BatchReport annotate_dataset(const std::vector<sessions::SessionManifest>& manifests, const PipelineConfig& config,
                             const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    BatchReport report;
    report.sessions.resize(manifests.size());
    run_parallel(manifests.size(), config.jobs, [&](std::size_t i) {
        const auto& m = manifests[i];
        auto& status = report.sessions[i];
        status.session_id = m.session_id;
        try {
            const auto result = annotate_session(m, config);
            annotate::save_labels(out_dir / (m.session_id + ".labels.csv"), result.labels);
            annotate::save_timeline(out_dir / (m.session_id + ".timeline.json"), result.rectified);
            status.ok = true;
            status.detections = result.rectified.detections.size();
            for (const auto& d : result.rectified.detections) {
                if (d.provenance == Provenance::Rectified) status.rectified_zones.push_back(d.zone);
            }
            status.unresolved = result.unresolved;
            status.labeled_frames = result.labels.labeled_count();
        } catch (const std::exception& e) {
            status.ok = false;
            status.error = e.what();
        }
    });
    return report;
}

std::vector<bool> load_blinks(const std::filesystem::path& path, std::size_t n_frames) {
    std::istringstream in(io::read_text(path));
    std::string line;
    std::getline(in, line);
    if (line != "frame,blink") throw ParseError(path.string() + ": expected header 'frame,blink'");
    std::vector<bool> blinks(n_frames, false);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("columns");
            const auto frame = std::stoull(line.substr(0, comma));
            const auto flag = line.substr(comma + 1);
            if (frame >= n_frames) throw StructuralError(path.string() + ": frame " + std::to_string(frame) + " out of range");
            blinks[frame] = flag == "1" || flag == "true";
        } catch (const std::logic_error&) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
    }
    return blinks;
}

namespace {

refine::EmbeddingSet labeled_rows(const FrameLabels& labels, const refine::EmbeddingSet& all) {
    std::vector<double> data;
    std::vector<std::size_t> frames;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto f = all.frame_indices()[i];
        if (f >= labels.n_frames() || labels.labels[f].zone == kUnlabeled) continue;
        const auto r = all.row(i);
        data.insert(data.end(), r.begin(), r.end());
        frames.push_back(f);
    }
    return refine::EmbeddingSet(std::move(data), all.dim(), std::move(frames));
}

SessionRefinement finish(const RefineInputs& in, const refine::ClusterModel* model,
                         const refine::ClusterZoneMap& map, const PipelineConfig& config) {
    SessionRefinement out;
    out.cluster_to_zone = map;
    out.labels = in.labels;
    if (model != nullptr) {
        auto r = refine::reassign_transition_frames(in.labels, in.embeddings, *model, map, config.transition_halfwidth);
        out.labels = std::move(r.labels);
        out.report = std::move(r.report);
    }
    if (in.blinks) {
        const auto before = out.labels;
        out.labels = refine::propagate_over_blinks(out.labels, *in.blinks);
        for (std::size_t f = 0; f < before.n_frames(); ++f) {
            if (!(before.labels[f] == out.labels.labels[f])) ++out.propagated;
        }
    }
    return out;
}

}  // namespace

SessionRefinement refine_session(const RefineInputs& in, const PipelineConfig& config) {
    config.validate();
    const auto points = labeled_rows(in.labels, in.embeddings);
    if (points.size() == 0) return finish(in, nullptr, {}, config);
    const auto model = refine::kmeans(points, std::min(config.k, points.size()), config.seed, config.max_iters, config.n_init);
    const auto map = refine::map_clusters_to_zones(model, in.labels, points);
    return finish(in, &model, map, config);
}

std::vector<SessionRefinement> refine_corpus(const std::vector<RefineInputs>& inputs, const PipelineConfig& config) {
    config.validate();
    // Stack every session on one frame axis so clustering and the mapping see the corpus.
    FrameLabels stacked;
    stacked.n_classes = 0;
    std::vector<double> data;
    std::vector<std::size_t> frames;
    std::size_t dim = 0;
    std::size_t base = 0;
    for (const auto& in : inputs) {
        stacked.n_classes = std::max(stacked.n_classes, in.labels.n_classes);
        stacked.labels.insert(stacked.labels.end(), in.labels.labels.begin(), in.labels.labels.end());
        const auto pts = labeled_rows(in.labels, in.embeddings);
        if (pts.size() > 0) {
            if (dim != 0 && pts.dim() != dim) throw StructuralError("sessions have different embedding dimensions");
            dim = pts.dim();
            data.insert(data.end(), pts.data().begin(), pts.data().end());
            for (auto f : pts.frame_indices()) frames.push_back(base + f);
        }
        base += in.labels.n_frames();
    }
    std::vector<SessionRefinement> out;
    if (frames.empty()) {
        for (const auto& in : inputs) out.push_back(finish(in, nullptr, {}, config));
        return out;
    }
    const refine::EmbeddingSet all(std::move(data), dim, std::move(frames));
    const auto model = refine::kmeans(all, std::min(config.k, all.size()), config.seed, config.max_iters, config.n_init);
    const auto map = refine::map_clusters_to_zones(model, stacked, all);
    for (const auto& in : inputs) out.push_back(finish(in, &model, map, config));
    return out;
}

BatchReport refine_dataset(const std::vector<sessions::SessionManifest>& manifests, const PipelineConfig& config,
                           const std::filesystem::path& labels_dir,
                           const std::optional<std::filesystem::path>& embeddings_dir,
                           const std::optional<std::filesystem::path>& blinks_dir, const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    BatchReport report;
    report.sessions.resize(manifests.size());
    std::vector<std::optional<RefineInputs>> inputs(manifests.size());

    for (std::size_t i = 0; i < manifests.size(); ++i) {
        const auto& m = manifests[i];
        report.sessions[i].session_id = m.session_id;
        try {
            RefineInputs in;
            in.labels = annotate::load_labels(labels_dir / (m.session_id + ".labels.csv"), m.fps);
            std::filesystem::path emb;
            if (embeddings_dir) {
                emb = *embeddings_dir / (m.session_id + ".emb");
            } else if (m.embeddings_path) {
                emb = *m.embeddings_path;
            } else {
                throw ArgumentError("no embeddings for session " + m.session_id);
            }
            in.embeddings = refine::load_embeddings(emb);
            if (blinks_dir) {
                const auto b = *blinks_dir / (m.session_id + ".blinks.csv");
                if (std::filesystem::exists(b)) in.blinks = load_blinks(b, in.labels.n_frames());
            } else if (m.blinks_path) {
                in.blinks = load_blinks(*m.blinks_path, in.labels.n_frames());
            }
            inputs[i] = std::move(in);
        } catch (const std::exception& e) {
            report.sessions[i].error = e.what();
        }
    }

    auto write = [&](std::size_t i, const SessionRefinement& r) {
        const auto& id = manifests[i].session_id;
        annotate::save_labels(out_dir / (id + ".refined.csv"), r.labels);
        json changed = json::object();
        for (const auto& [zone, delta] : r.report.net_change_per_zone) changed[std::to_string(zone)] = delta;
        json doc = {{"session_id", id},
                    {"transition_frames", r.report.transition_frames},
                    {"changed_frames", r.report.changed},
                    {"net_change_per_zone", changed},
                    {"missing_embedding", r.report.missing_embedding},
                    {"unmapped_cluster", r.report.unmapped_cluster},
                    {"propagated_blink_frames", r.propagated},
                    {"cluster_to_zone", r.cluster_to_zone}};
        io::write_atomic(out_dir / (id + ".refine.json"), doc.dump(2) + "\n");
        auto& s = report.sessions[i];
        s.ok = true;
        s.labeled_frames = r.labels.labeled_count();
    };

    if (config.corpus_wide) {
        std::vector<RefineInputs> ok;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i]) {
                ok.push_back(*inputs[i]);
                idx.push_back(i);
            }
        }
        try {
            const auto results = refine_corpus(ok, config);
            for (std::size_t j = 0; j < results.size(); ++j) write(idx[j], results[j]);
        } catch (const std::exception& e) {
            for (auto i : idx) report.sessions[i].error = e.what();
        }
        return report;
    }

    run_parallel(manifests.size(), config.jobs, [&](std::size_t i) {
        if (!inputs[i]) return;
        try {
            write(i, refine_session(*inputs[i], config));
        } catch (const std::exception& e) {
            report.sessions[i].ok = false;
            report.sessions[i].error = e.what();
        }
    });
    return report;
}

}  // namespace s2l::pipeline
