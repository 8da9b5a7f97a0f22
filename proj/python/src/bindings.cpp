#include <map>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "s2l/annotate.hpp"
#include "s2l/audio.hpp"
#include "s2l/error.hpp"
#include "s2l/eval.hpp"
#include "s2l/illum.hpp"
#include "s2l/refine.hpp"
#include "s2l/sessions.hpp"
#include "s2l/stt.hpp"
#include "s2l/synth.hpp"

namespace py = pybind11;
using namespace s2l;

namespace {

FrameLabels labels_of(const std::vector<int>& zones, int n_classes = 9) {
    FrameLabels l;
    l.n_classes = n_classes;
    for (int z : zones) l.labels.push_back({z, z == kUnlabeled ? Provenance::Unlabeled : Provenance::Stt});
    return l;
}

std::vector<int> zones_of(const FrameLabels& l) {
    std::vector<int> out;
    out.reserve(l.labels.size());
    for (const auto& f : l.labels) out.push_back(f.zone);
    return out;
}

MarkerTimeline timeline_of(const std::vector<MarkerDetection>& detections) {
    MarkerTimeline t;
    t.detections = detections;
    t.validate();
    return t;
}

audio::VoicingParams voicing_of(double window_s, double hop_s, double lo_hz, double hi_hz, double threshold) {
    audio::VoicingParams v;
    v.window_s = window_s;
    v.hop_s = hop_s;
    v.band = {lo_hz, hi_hz};
    v.ratio_threshold = threshold;
    return v;
}

refine::EmbeddingSet points_of(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ArgumentError("no points");
    const std::size_t dim = rows.front().size();
    std::vector<double> data;
    std::vector<std::size_t> frames;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) throw StructuralError("ragged point list");
        data.insert(data.end(), rows[i].begin(), rows[i].end());
        frames.push_back(i);
    }
    return refine::EmbeddingSet(std::move(data), dim, std::move(frames));
}

illum::ChromaticityParams chroma_params(const illum::Vec3& wavelength_nm, const illum::Vec3& reflectance,
                                        const illum::Vec3& delta, double temperature_k) {
    illum::ChromaticityParams p;
    p.wavelength_nm = wavelength_nm;
    p.reflectance = reflectance;
    p.delta_amplitude = delta;
    p.temperature_k = temperature_k;
    return p;
}

const illum::ChromaticityParams kChroma;

}  // namespace

PYBIND11_MODULE(_s2l, m) {
    m.doc() = "speak2label core";

    auto& base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", base_error.ptr());

    py::class_<audio::AudioTrack>(m, "AudioTrack")
        .def(py::init<std::vector<double>, int>(), py::arg("samples"), py::arg("sample_rate_hz"))
        .def_property_readonly("samples",
                               [](const audio::AudioTrack& t) {
                                   return std::vector<double>(t.samples().begin(), t.samples().end());
                               })
        .def_property_readonly("sample_rate_hz", &audio::AudioTrack::sample_rate_hz)
        .def_property_readonly("duration_s", &audio::AudioTrack::duration_s)
        .def("__len__", &audio::AudioTrack::size);

    m.def(
        "to_mono",
        [](const std::vector<std::vector<double>>& channels, int rate) { return audio::to_mono(channels, rate); },
        py::arg("channels"), py::arg("sample_rate_hz"));
    m.def("load_wav", &audio::load_wav, py::arg("path"));

    m.def(
        "analyze_window",
        [](const audio::AudioTrack& track, double start_s, double duration_s, double lo_hz, double hi_hz) {
            const auto w = audio::analyze_window(track, start_s, duration_s, {lo_hz, hi_hz});
            return py::dict(py::arg("dominant_freq_hz") = w.dominant_freq_hz,
                            py::arg("band_energy_ratio") = w.band_energy_ratio);
        },
        py::arg("track"), py::arg("start_s"), py::arg("duration_s"), py::arg("lo_hz") = 300.0,
        py::arg("hi_hz") = 3000.0);

    m.def(
        "voiced_segments",
        [](const audio::AudioTrack& track, double window_s, double hop_s, double lo_hz, double hi_hz, double threshold) {
            std::vector<std::pair<double, double>> out;
            for (const auto& s : audio::voiced_segments(track, voicing_of(window_s, hop_s, lo_hz, hi_hz, threshold))) {
                out.emplace_back(s.start_s, s.end_s);
            }
            return out;
        },
        py::arg("track"), py::arg("window_s") = 0.25, py::arg("hop_s") = 0.10, py::arg("lo_hz") = 300.0,
        py::arg("hi_hz") = 3000.0, py::arg("ratio_threshold") = 0.5);

    py::class_<MarkerDetection>(m, "Detection")
        .def(py::init([](int zone, double start_s, double end_s) {
                 return MarkerDetection{zone, start_s, end_s, Provenance::Stt, 1.0};
             }),
             py::arg("zone"), py::arg("start_s"), py::arg("end_s"))
        .def_readonly("zone", &MarkerDetection::zone)
        .def_readonly("start_s", &MarkerDetection::start_s)
        .def_readonly("end_s", &MarkerDetection::end_s)
        .def_readonly("confidence", &MarkerDetection::confidence)
        .def_property_readonly("provenance", [](const MarkerDetection& d) { return std::string(to_string(d.provenance)); })
        .def("__repr__", [](const MarkerDetection& d) {
            return "Detection(zone=" + std::to_string(d.zone) + ", start_s=" + std::to_string(d.start_s) +
                   ", end_s=" + std::to_string(d.end_s) + ")";
        });

    m.def(
        "align_keywords",
        [](const std::vector<std::tuple<std::string, double, double, double>>& tokens, double min_confidence) {
            stt::Transcript t;
            for (const auto& [text, start, end, conf] : tokens) t.tokens.push_back({text, start, end, conf});
            return annotate::align_keywords(t, stt::KeywordSet::digits(), min_confidence).detections;
        },
        py::arg("tokens"), py::arg("min_confidence") = 0.5,
        "Greedy in-order alignment of (text, start_s, end_s, confidence) tokens to the digit keywords.");

    m.def(
        "rectify_gaps",
        [](const std::vector<MarkerDetection>& detections, const audio::AudioTrack& track) {
            annotate::RectifyParams p;
            const auto r = annotate::rectify_gaps(timeline_of(detections), track, p);
            return py::make_tuple(r.timeline.detections, r.unresolved);
        },
        py::arg("detections"), py::arg("track"));

    m.def(
        "emit_frame_labels",
        [](const std::vector<MarkerDetection>& detections, double fps, std::size_t n_frames, int offset) {
            return zones_of(annotate::emit_frame_labels(timeline_of(detections), fps, n_frames, offset));
        },
        py::arg("detections"), py::arg("fps"), py::arg("n_frames"), py::arg("offset_frames") = 10);

    m.def(
        "kmeans",
        [](const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed, std::size_t n_init) {
            const auto model = refine::kmeans(points_of(points), k, seed, 300, n_init);
            std::vector<std::vector<double>> centers;
            for (std::size_t c = 0; c < model.k; ++c) {
                centers.emplace_back(model.center(c).begin(), model.center(c).end());
            }
            return py::dict(py::arg("centers") = centers, py::arg("assignments") = model.assignments,
                            py::arg("inertia") = model.inertia, py::arg("iterations") = model.iterations);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 42, py::arg("n_init") = 10);

    m.def(
        "propagate_over_blinks",
        [](const std::vector<int>& zones, const std::vector<bool>& blinks) {
            return zones_of(refine::propagate_over_blinks(labels_of(zones), blinks));
        },
        py::arg("zones"), py::arg("blinks"));

    m.def("wien_k2", [] { return illum::RadiationConstants{}.k2(); });
    m.def(
        "chromaticity",
        [](const illum::Vec3& wl, const illum::Vec3& refl, const illum::Vec3& delta, double t, bool check_bands) {
            return illum::chromaticity(chroma_params(wl, refl, delta, t), {}, check_bands);
        },
        py::arg("wavelength_nm") = kChroma.wavelength_nm, py::arg("reflectance") = kChroma.reflectance,
        py::arg("delta_amplitude") = kChroma.delta_amplitude, py::arg("temperature_k") = kChroma.temperature_k,
        py::arg("check_bands") = true);
    m.def(
        "decompose",
        [](const illum::Vec3& wl, const illum::Vec3& refl, const illum::Vec3& delta, double t, bool check_bands) {
            const auto d = illum::decompose(chroma_params(wl, refl, delta, t), {}, check_bands);
            return py::make_tuple(d.robust, d.dependent);
        },
        py::arg("wavelength_nm") = kChroma.wavelength_nm, py::arg("reflectance") = kChroma.reflectance,
        py::arg("delta_amplitude") = kChroma.delta_amplitude, py::arg("temperature_k") = kChroma.temperature_k,
        py::arg("check_bands") = true);

    m.def(
        "split_subjects",
        [](std::vector<std::string> subjects, std::tuple<double, double, double> fractions, std::uint64_t seed) {
            const auto [tr, va, te] = fractions;
            std::map<std::string, std::string> out;
            for (const auto& [s, p] : sessions::split_subject_ids(std::move(subjects), {tr, va, te}, seed)) {
                out[s] = std::string(sessions::to_string(p));
            }
            return out;
        },
        py::arg("subjects"), py::arg("fractions") = std::make_tuple(0.60, 0.245, 0.155), py::arg("seed") = 0);

    m.def(
        "confusion",
        [](const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
            const auto cm = eval::confusion(labels_of(truth, n_classes), labels_of(pred, n_classes));
            std::vector<std::vector<std::uint64_t>> rows;
            for (int t = 1; t <= cm.k; ++t) {
                rows.emplace_back();
                for (int p = 1; p <= cm.k; ++p) rows.back().push_back(cm.at(t, p));
            }
            return rows;
        },
        py::arg("truth"), py::arg("pred"), py::arg("n_classes") = 9);
    auto from_rows = [](const std::vector<std::vector<std::uint64_t>>& rows) {
        std::vector<std::uint64_t> flat;
        for (const auto& r : rows) {
            if (r.size() != rows.size()) throw ArgumentError("confusion matrix must be square");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return eval::from_counts(static_cast<int>(rows.size()), std::move(flat));
    };
    m.def("accuracy", [from_rows](const std::vector<std::vector<std::uint64_t>>& cm) { return eval::accuracy(from_rows(cm)); },
          py::arg("confusion"), "Percentage of correct frames.");
    m.def("macro_f1", [from_rows](const std::vector<std::vector<std::uint64_t>>& cm) { return eval::macro_f1(from_rows(cm)); },
          py::arg("confusion"));
    m.def(
        "merge_zones_7", [](const std::vector<int>& zones) { return zones_of(eval::merge_zones_7(labels_of(zones))); },
        py::arg("zones"));

    m.def(
        "synth_session",
        [](std::uint64_t seed, double miss_rate, double substitute_rate, int offset_frames) {
            synth::SynthSpec spec;
            spec.seed = seed;
            spec.miss_rate = miss_rate;
            spec.substitute_rate = substitute_rate;
            spec.offset_frames = offset_frames;
            const auto s = synth::generate(spec);
            std::vector<std::tuple<std::string, double, double, double>> tokens;
            for (const auto& t : s.transcript.tokens) tokens.emplace_back(t.text, t.start_s, t.end_s, t.confidence);
            return py::dict(py::arg("track") = s.track, py::arg("tokens") = tokens,
                            py::arg("truth") = s.truth.timeline.detections,
                            py::arg("truth_labels") = zones_of(s.truth.labels), py::arg("fps") = spec.fps,
                            py::arg("missed") = s.corruption.missed);
        },
        py::arg("seed") = 1, py::arg("miss_rate") = 0.0, py::arg("substitute_rate") = 0.0, py::arg("offset_frames") = 10);
}
