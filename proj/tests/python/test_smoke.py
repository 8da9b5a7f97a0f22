import math

import pytest

import speak2label as s2l


def test_wien_constant():
    assert abs(s2l.wien_k2() - 1.4394e-2) / 1.4394e-2 < 1e-4


def test_chromaticity_factors():
    c = s2l.chromaticity(reflectance=(0.6, 0.3, 0.2), temperature_k=3200.0)
    a, b = s2l.decompose(reflectance=(0.6, 0.3, 0.2), temperature_k=3200.0)
    assert math.prod(c) == pytest.approx(1.0, abs=1e-12)
    for ci, ai, bi in zip(c, a, b):
        assert ai * bi == pytest.approx(ci, abs=1e-12)
    with pytest.raises(s2l.ArgumentError):
        s2l.chromaticity(wavelength_nm=(550.0, 550.0, 550.0))


def test_analyze_window_tone():
    rate = 16000
    samples = [0.5 * math.sin(2 * math.pi * 1000 * i / rate) for i in range(4000)]
    w = s2l.analyze_window(s2l.AudioTrack(samples, rate), 0.0, 0.25)
    assert w["band_energy_ratio"] > 0.99
    assert abs(w["dominant_freq_hz"] - 1000.0) < 4.0


def test_invalid_track_raises():
    with pytest.raises(s2l.Error):
        s2l.AudioTrack([2.0], 16000)


def test_offset_semantics():
    d = s2l.Detection(4, 100 / 30, 120 / 30)
    zones = s2l.emit_frame_labels([d], 30.0, 300, 10)
    labeled = [f for f, z in enumerate(zones) if z]
    assert labeled[0] == 90 and labeled[-1] == 130
    assert set(zones[90:131]) == {4}


def test_synthetic_session_round_trip():
    s = s2l.synth_session(seed=3, miss_rate=0.3)
    aligned = s2l.align_keywords(s["tokens"])
    assert len(aligned) == 9 - len(s["missed"])
    rectified, unresolved = s2l.rectify_gaps(aligned, s["track"])
    assert unresolved == []
    assert [d.zone for d in rectified] == list(range(1, 10))
    labels = s2l.emit_frame_labels(rectified, s["fps"], len(s["truth_labels"]))
    cm = s2l.confusion(s["truth_labels"], labels)
    assert s2l.accuracy(cm) > 95.0


def test_kmeans_and_metrics():
    pts = [[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]]
    res = s2l.kmeans(pts, 2, seed=1)
    a = res["assignments"]
    assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]
    assert s2l.accuracy([[1, 1], [1, 1]]) == pytest.approx(50.0)
    assert s2l.macro_f1([[1, 1], [1, 1]]) == pytest.approx(0.5)
    assert s2l.merge_zones_7([1, 2, 5, 6, 9, 0]) == [1, 1, 4, 4, 7, 0]


def test_split_and_blinks():
    split = s2l.split_subjects([f"p{i}" for i in range(338)], seed=5)
    counts = {p: list(split.values()).count(p) for p in ("train", "val", "test")}
    assert counts == {"train": 203, "val": 83, "test": 52}
    assert s2l.propagate_over_blinks([1, 2, 3, 4], [False, True, True, False]) == [1, 1, 1, 4]
