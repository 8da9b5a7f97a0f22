#include "s2l/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "s2l/error.hpp"

namespace s2l::eval {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (int c = 1; c <= k; ++c) t += at(c, c);
    return t;
}

ConfusionMatrix from_counts(int k, std::vector<std::uint64_t> counts) {
    if (k < 1 || counts.size() != static_cast<std::size_t>(k * k)) throw ArgumentError("confusion counts must be k*k");
    return {k, std::move(counts), 0};
}

ConfusionMatrix confusion(const FrameLabels& truth, const FrameLabels& pred) {
    if (truth.n_frames() != pred.n_frames()) {
        throw ArgumentError("truth has " + std::to_string(truth.n_frames()) + " frames, prediction " +
                            std::to_string(pred.n_frames()));
    }
    ConfusionMatrix cm;
    cm.k = std::max(truth.n_classes, pred.n_classes);
    cm.counts.assign(static_cast<std::size_t>(cm.k * cm.k), 0);
    for (std::size_t f = 0; f < truth.n_frames(); ++f) {
        const int t = truth.labels[f].zone;
        const int p = pred.labels[f].zone;
        if (t == kUnlabeled || p == kUnlabeled) {
            if (t != p) ++cm.excluded;
            continue;
        }
        if (t > cm.k || p > cm.k) throw ArgumentError("label exceeds class count");
        ++cm.counts[static_cast<std::size_t>((t - 1) * cm.k + (p - 1))];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UndefinedMetricError("F1 of an empty confusion matrix");
    double sum = 0.0;
    for (int c = 1; c <= cm.k; ++c) {
        std::uint64_t row = 0;
        std::uint64_t col = 0;
        for (int j = 1; j <= cm.k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const auto tp = static_cast<double>(cm.at(c, c));
        // 2PR/(P+R) simplifies to 2TP/(row + col); zero when TP is zero.
        if (tp > 0.0) sum += 2.0 * tp / static_cast<double>(row + col);
    }
    return sum / cm.k;
}

int merged_class(int zone) {
    static constexpr int kMap[] = {kUnlabeled, 1, 1, 2, 3, 4, 4, 5, 6, 7};
    if (zone < 0 || zone > 9) throw ArgumentError("zone " + std::to_string(zone) + " outside the 9-zone scheme");
    return kMap[zone];
}

std::string merged_class_name(int merged) {
    static const char* const kNames[] = {"", "A", "3", "4", "B", "7", "8", "9"};
    if (merged < 1 || merged > 7) throw ArgumentError("merged class out of range");
    return kNames[merged];
}

FrameLabels merge_zones_7(const FrameLabels& labels) {
    FrameLabels out = labels;
    out.n_classes = 7;
    for (auto& l : out.labels) l.zone = merged_class(l.zone);
    return out;
}

double RecoveryReport::recovery_rate() const {
    if (missed.empty()) return 1.0;
    return static_cast<double>(recovered_correct.size()) / static_cast<double>(missed.size());
}

RecoveryReport recovery_report(const MarkerTimeline& aligned, const MarkerTimeline& rectified,
                               const synth::GroundTruth& truth, int offset_frames) {
    RecoveryReport r;
    auto find = [](const MarkerTimeline& t, int zone) -> const MarkerDetection* {
        for (const auto& d : t.detections) {
            if (d.zone == zone) return &d;
        }
        return nullptr;
    };
    for (const auto& td : truth.timeline.detections) {
        if (find(aligned, td.zone) != nullptr) continue;
        r.missed.push_back(td.zone);
        const auto* rd = find(rectified, td.zone);
        if (rd == nullptr) continue;
        r.recovered.push_back(td.zone);
        const double overlap = std::max(0.0, std::min(rd->end_s, td.end_s) - std::max(rd->start_s, td.start_s));
        const double len = td.end_s - td.start_s;
        const bool correct = len > 0.0 ? overlap >= 0.5 * len : (rd->start_s <= td.start_s && rd->end_s >= td.end_s);
        (correct ? r.recovered_correct : r.recovered_incorrect).push_back(td.zone);
    }
    const double fps = truth.labels.fps;
    const std::size_t n = truth.labels.n_frames();
    const auto before = annotate::emit_frame_labels(aligned, fps, n, offset_frames).labeled_count();
    const auto after = annotate::emit_frame_labels(rectified, fps, n, offset_frames).labeled_count();
    r.frames_gained = static_cast<long long>(after) - static_cast<long long>(before);
    return r;
}

std::vector<bool> boundary_mask(const FrameLabels& labels, int margin) {
    const auto n = static_cast<long long>(labels.n_frames());
    std::vector<bool> mask(labels.n_frames(), false);
    for (long long f = 1; f < n; ++f) {
        if (labels.labels[static_cast<std::size_t>(f)].zone == labels.labels[static_cast<std::size_t>(f - 1)].zone) {
            continue;
        }
        for (long long g = std::max<long long>(0, f - margin); g < std::min<long long>(n, f + margin); ++g) {
            mask[static_cast<std::size_t>(g)] = true;
        }
    }
    return mask;
}

double frame_agreement(const FrameLabels& truth, const FrameLabels& pred, const std::vector<bool>& skip) {
    if (truth.n_frames() != pred.n_frames() || skip.size() != truth.n_frames()) {
        throw ArgumentError("frame_agreement: length mismatch");
    }
    std::size_t counted = 0;
    std::size_t agree = 0;
    for (std::size_t f = 0; f < truth.n_frames(); ++f) {
        if (skip[f]) continue;
        ++counted;
        if (truth.labels[f].zone == pred.labels[f].zone) ++agree;
    }
    if (counted == 0) throw UndefinedMetricError("no frames left to compare");
    return 100.0 * static_cast<double>(agree) / static_cast<double>(counted);
}

namespace {

std::string class_name(int c, bool merged) { return merged ? merged_class_name(c) : std::to_string(c); }

}  // namespace

std::string metrics_json(const ConfusionMatrix& cm, bool merged) {
    nlohmann::json doc;
    doc["classes"] = nlohmann::json::array();
    for (int c = 1; c <= cm.k; ++c) doc["classes"].push_back(class_name(c, merged));
    doc["confusion"] = nlohmann::json::array();
    for (int t = 1; t <= cm.k; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (int p = 1; p <= cm.k; ++p) row.push_back(cm.at(t, p));
        doc["confusion"].push_back(row);
    }
    doc["labeled_frames"] = cm.total();
    doc["excluded_frames"] = cm.excluded;
    if (cm.total() > 0) {
        doc["accuracy_pct"] = accuracy(cm);
        doc["macro_f1"] = macro_f1(cm);
    } else {
        doc["accuracy_pct"] = nullptr;
        doc["macro_f1"] = nullptr;
    }
    doc["merged_7"] = merged;
    return doc.dump(2) + "\n";
}

std::string metrics_table(const ConfusionMatrix& cm, bool merged) {
    std::ostringstream out;
    out << "truth\\pred";
    for (int c = 1; c <= cm.k; ++c) out << std::setw(8) << class_name(c, merged);
    out << '\n';
    for (int t = 1; t <= cm.k; ++t) {
        out << std::setw(10) << class_name(t, merged);
        for (int p = 1; p <= cm.k; ++p) out << std::setw(8) << cm.at(t, p);
        out << '\n';
    }
    out << "labeled frames: " << cm.total() << "  excluded: " << cm.excluded << '\n';
    if (cm.total() > 0) {
        out << std::fixed << std::setprecision(2) << "accuracy: " << accuracy(cm) << " %\n"
            << std::setprecision(4) << "macro F1: " << macro_f1(cm) << '\n';
    }
    return out.str();
}

}  // namespace s2l::eval
