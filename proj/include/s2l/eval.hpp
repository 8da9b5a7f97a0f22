#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2l/annotate.hpp"
#include "s2l/synth.hpp"

namespace s2l::eval {

/// k x k counts; rows are true classes, columns predicted (class c at index c-1).
struct ConfusionMatrix {
    int k = 0;
    std::vector<std::uint64_t> counts;
    /// Frames labeled on exactly one side (skipped from the counts).
    std::uint64_t excluded = 0;

    std::uint64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>((truth - 1) * k + (pred - 1))]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
};

/// Throws ArgumentError on length mismatch.
ConfusionMatrix confusion(const FrameLabels& truth, const FrameLabels& pred);

/// Builds a matrix from explicit counts (row-major, k*k).
ConfusionMatrix from_counts(int k, std::vector<std::uint64_t> counts);

/// Percentage of correct labeled frames. Throws UndefinedMetricError when empty.
double accuracy(const ConfusionMatrix& cm);

/// Unweighted mean of per-class F1; classes without support or predictions score 0.
double macro_f1(const ConfusionMatrix& cm);

/// Merged class index for a 9-zone label: {1,2} -> 1, 3 -> 2, 4 -> 3, {5,6} -> 4,
/// 7 -> 5, 8 -> 6, 9 -> 7.
int merged_class(int zone);
/// Display name of a merged class ("A" and "B" for the merged pairs, else the zone).
std::string merged_class_name(int merged);

/// Collapses the 9-zone scheme to 7 classes.
FrameLabels merge_zones_7(const FrameLabels& labels);

struct RecoveryReport {
    std::vector<int> missed;
    std::vector<int> recovered;
    std::vector<int> recovered_correct;
    std::vector<int> recovered_incorrect;
    long long frames_gained = 0;

    double recovery_rate() const;
};

/// Compares the aligned (pre-rectification) and rectified timelines against the
/// synthetic truth. A recovery is correct when it covers >= 50% of the true interval.
RecoveryReport recovery_report(const MarkerTimeline& aligned, const MarkerTimeline& rectified,
                               const synth::GroundTruth& truth, int offset_frames);

/// Frames within `margin` frames of a label change in `labels` (change between
/// f-1 and f marks frames f-margin .. f+margin-1).
std::vector<bool> boundary_mask(const FrameLabels& labels, int margin);

/// Percentage of frames with identical zone, skipping masked frames.
double frame_agreement(const FrameLabels& truth, const FrameLabels& pred, const std::vector<bool>& skip);

std::string metrics_json(const ConfusionMatrix& cm, bool merged);
std::string metrics_table(const ConfusionMatrix& cm, bool merged);

}  // namespace s2l::eval
