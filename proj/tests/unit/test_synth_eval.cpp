#include <random>

#include "doctest.h"
#include "s2l/annotate.hpp"
#include "s2l/error.hpp"
#include "s2l/eval.hpp"
#include "s2l/synth.hpp"
#include "test_support.hpp"

using namespace s2l;
using s2l::testing::labels_from;
using s2l::testing::zones_of;

TEST_CASE("synthetic sessions") {
    synth::SynthSpec spec;
    spec.seed = 5;

    SUBCASE("clean session has every zone in order") {
        const auto s = synth::generate(spec);
        CHECK(s.truth.timeline.detections.size() == 9);
        CHECK(s.transcript.tokens.size() == 9);
        CHECK(s.track.duration_s() == doctest::Approx(spec.effective_duration_s()));
        for (int z = 1; z <= 9; ++z) {
            const auto& d = s.truth.timeline.detections[static_cast<std::size_t>(z - 1)];
            CHECK(d.zone == z);
            CHECK(d.start_s == doctest::Approx(spec.burst_start_s(z)));
        }
        const auto& samples = s.track.samples();
        for (double v : samples) CHECK(std::abs(v) <= 1.0);
        CHECK(s.truth.labels.n_frames() == s.manifest.n_frames);
    }
    SUBCASE("deterministic in the seed") {
        spec.miss_rate = 0.3;
        const auto a = synth::generate(spec);
        const auto b = synth::generate(spec);
        CHECK(a.track.samples().size() == b.track.samples().size());
        CHECK(std::equal(a.track.samples().begin(), a.track.samples().end(), b.track.samples().begin()));
        CHECK(a.corruption.missed == b.corruption.missed);
    }
    SUBCASE("forced misses drop the token") {
        spec.forced_misses = {4, 5};
        const auto s = synth::generate(spec);
        CHECK(s.transcript.tokens.size() == 7);
        CHECK(s.corruption.missed == std::vector<int>{4, 5});
    }
    SUBCASE("substitutions use the garbled token") {
        spec.substitute_rate = 1.0;
        const auto s = synth::generate(spec);
        for (const auto& t : s.transcript.tokens) CHECK(t.text == synth::kGarbledToken);
        CHECK(s.corruption.substituted.size() == 9);
    }
    SUBCASE("invalid specs") {
        spec.miss_rate = 1.5;
        CHECK_THROWS_AS(spec.validate(), ArgumentError);
        spec = {};
        spec.duration_s = 2.0;
        CHECK_THROWS_AS(spec.validate(), ArgumentError);
        CHECK_THROWS_AS(synth::spec_from_json(R"({"n_zones": "x"})"), ParseError);
        CHECK(synth::spec_from_json(R"({"miss_rate": 0.25, "seed": 9})").seed == 9);
    }
    SUBCASE("written files load back") {
        const auto dir = s2l::testing::scratch_dir("synth");
        const auto manifests = synth::generate_dataset(spec, 2, dir);
        REQUIRE(manifests.size() == 2);
        CHECK(manifests[0].session_id == "synth_000");
        CHECK(std::filesystem::exists(dir / "manifest.json"));
        CHECK(std::filesystem::exists(manifests[1].audio_path));
        const auto truth = annotate::load_labels(*manifests[0].truth_labels_path, 30.0);
        CHECK(truth.n_frames() == manifests[0].n_frames);
    }
}

TEST_CASE("confusion metrics") {
    SUBCASE("perfect prediction") {
        const auto l = labels_from({1, 2, 3, 4, 5, 6, 7, 8, 9});
        const auto cm = eval::confusion(l, l);
        CHECK(eval::accuracy(cm) == 100.0);
        CHECK(eval::macro_f1(cm) == 1.0);
    }
    SUBCASE("uniform 2x2") {
        const auto cm = eval::from_counts(2, {1, 1, 1, 1});
        CHECK(eval::accuracy(cm) == doctest::Approx(50.0));
        CHECK(eval::macro_f1(cm) == doctest::Approx(0.5));
    }
    SUBCASE("empty matrix is undefined") {
        const auto cm = eval::confusion(labels_from({1, 2, 3}), labels_from({0, 0, 0}));
        CHECK(cm.excluded == 3);
        CHECK_THROWS_AS(eval::accuracy(cm), UndefinedMetricError);
        CHECK_THROWS_AS(eval::macro_f1(cm), UndefinedMetricError);
    }
    SUBCASE("hand-computed ten frames") {
        const auto truth = labels_from({1, 1, 1, 2, 2, 2, 3, 3, 0, 3}, 30.0, 3);
        const auto pred = labels_from({1, 1, 2, 2, 2, 3, 3, 0, 0, 3}, 30.0, 3);
        const auto cm = eval::confusion(truth, pred);
        CHECK(cm.total() == 8);
        CHECK(cm.excluded == 1);
        CHECK(cm.at(1, 1) == 2);
        CHECK(cm.at(1, 2) == 1);
        CHECK(cm.at(2, 3) == 1);
        CHECK(eval::accuracy(cm) == doctest::Approx(75.0));
        // F1: class1 4/5, class2 4/6, class3 4/5.
        CHECK(eval::macro_f1(cm) == doctest::Approx((0.8 + 2.0 / 3.0 + 0.8) / 3.0));
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(eval::confusion(labels_from({1}), labels_from({1, 2})), ArgumentError);
    }
}

TEST_CASE("seven-class merge") {
    CHECK(eval::merged_class(1) == eval::merged_class(2));
    CHECK(eval::merged_class(5) == eval::merged_class(6));
    CHECK(eval::merged_class(0) == kUnlabeled);
    CHECK(eval::merged_class_name(eval::merged_class(6)) == "B");
    CHECK(eval::merged_class_name(eval::merged_class(9)) == "9");
    CHECK_THROWS_AS(eval::merged_class(10), ArgumentError);

    SUBCASE("confusions inside a merged pair vanish") {
        const auto truth = labels_from({1, 2, 5, 6, 7});
        const auto pred = labels_from({2, 1, 6, 5, 8});
        const double raw = eval::accuracy(eval::confusion(truth, pred));
        const double merged = eval::accuracy(eval::confusion(eval::merge_zones_7(truth), eval::merge_zones_7(pred)));
        CHECK(raw == 0.0);
        CHECK(merged == doctest::Approx(80.0));
    }
    SUBCASE("merging never lowers accuracy") {
        std::mt19937 gen(12);
        std::uniform_int_distribution<int> zone(0, 9);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<int> t(60);
            std::vector<int> p(60);
            for (auto& z : t) z = 1 + zone(gen) % 9;
            for (auto& z : p) z = zone(gen);
            const auto a = labels_from(t);
            const auto b = labels_from(p);
            const double raw = eval::accuracy(eval::confusion(a, b));
            const double merged = eval::accuracy(eval::confusion(eval::merge_zones_7(a), eval::merge_zones_7(b)));
            CHECK(merged >= raw);
        }
    }
}

TEST_CASE("recovery report") {
    synth::SynthSpec spec;
    spec.forced_misses = {3};
    const auto s = synth::generate(spec);
    MarkerTimeline aligned = s.truth.timeline;
    aligned.detections.erase(aligned.detections.begin() + 2);

    SUBCASE("exact recovery") {
        const auto r = eval::recovery_report(aligned, s.truth.timeline, s.truth, 10);
        CHECK(r.missed == std::vector<int>{3});
        CHECK(r.recovered_correct == std::vector<int>{3});
        CHECK(r.recovery_rate() == 1.0);
        CHECK(r.frames_gained > 0);
    }
    SUBCASE("a misplaced recovery is incorrect") {
        MarkerTimeline wrong = s.truth.timeline;
        wrong.detections[2].start_s = wrong.detections[2].end_s + 0.1;
        wrong.detections[2].end_s = wrong.detections[2].start_s + 0.3;
        const auto r = eval::recovery_report(aligned, wrong, s.truth, 10);
        CHECK(r.recovered_incorrect == std::vector<int>{3});
        CHECK(r.recovery_rate() == 0.0);
    }
    SUBCASE("nothing missed") {
        const auto r = eval::recovery_report(s.truth.timeline, s.truth.timeline, s.truth, 10);
        CHECK(r.missed.empty());
        CHECK(r.recovery_rate() == 1.0);
        CHECK(r.frames_gained == 0);
    }
}

TEST_CASE("boundary mask and agreement") {
    const auto l = labels_from({1, 1, 1, 1, 2, 2, 2, 2});
    const auto m = eval::boundary_mask(l, 2);
    CHECK(m == std::vector<bool>{false, false, true, true, true, true, false, false});
    const auto p = labels_from({1, 1, 1, 2, 2, 2, 2, 1});
    CHECK(eval::frame_agreement(l, p, m) == doctest::Approx(75.0));
    CHECK_THROWS_AS(eval::frame_agreement(l, p, std::vector<bool>(8, true)), UndefinedMetricError);
}
