"""Python access to the speak2label gaze-zone annotation core."""

from ._s2l import (
    AudioTrack,
    Detection,
    ArgumentError,
    Error,
    accuracy,
    align_keywords,
    analyze_window,
    chromaticity,
    confusion,
    decompose,
    emit_frame_labels,
    kmeans,
    load_wav,
    macro_f1,
    merge_zones_7,
    propagate_over_blinks,
    rectify_gaps,
    split_subjects,
    synth_session,
    to_mono,
    voiced_segments,
    wien_k2,
)

__all__ = [name for name in dir() if not name.startswith("_")]
