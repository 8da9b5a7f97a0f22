#include <cstdlib>
#include <sys/wait.h>

#include "doctest.h"
#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/pipeline.hpp"
#include "s2l/synth.hpp"
#include "test_support.hpp"

using namespace s2l;
using s2l::testing::zones_of;

TEST_CASE("config") {
    pipeline::PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    const auto parsed = pipeline::config_from_json(R"({"offset_frames": 4, "backend": "tone-spotter"})", c);
    CHECK(parsed.offset_frames == 4);
    CHECK(parsed.backend == pipeline::BackendKind::ToneSpotter);
    const auto round = pipeline::config_from_json(pipeline::config_to_json(parsed));
    CHECK(round.offset_frames == 4);
    CHECK(round.hop_s == c.hop_s);
    CHECK_THROWS_AS(pipeline::config_from_json(R"({"offset_frames": -1})").validate(), ArgumentError);
    CHECK_THROWS_AS(pipeline::config_from_json(R"({"backend": "nope"})"), ArgumentError);
}

TEST_CASE("annotate a synthetic session") {
    synth::SynthSpec spec;
    spec.seed = 21;
    const pipeline::PipelineConfig config;

    SUBCASE("clean transcript reproduces the truth") {
        const auto s = synth::generate(spec);
        auto m = s.manifest;
        const auto dir = s2l::testing::scratch_dir("pipe_clean");
        synth::write_session(s, dir);
        m.audio_path = dir / m.audio_path;
        m.transcript_path = dir / *m.transcript_path;
        const auto a = pipeline::annotate_session(m, config);
        CHECK(a.unresolved.empty());
        CHECK(zones_of(a.labels) == zones_of(s.truth.labels));
    }
    SUBCASE("a dropped zone is rectified") {
        spec.forced_misses = {5};
        const auto s = synth::generate(spec);
        auto m = s.manifest;
        m.transcript_path.reset();
        pipeline::PipelineConfig tone = config;
        tone.backend = pipeline::BackendKind::Sidecar;
        const auto dir = s2l::testing::scratch_dir("pipe_miss");
        synth::write_session(s, dir);
        m.transcript_path = dir / *s.manifest.transcript_path;
        const auto a = pipeline::annotate_track(m, s.track, tone);
        CHECK(a.aligned.detections.size() == 8);
        CHECK(a.rectified.detections.size() == 9);
        CHECK(a.rectified.detections[4].provenance == Provenance::Rectified);
    }
    SUBCASE("smaller offset shrinks every span") {
        const auto s = synth::generate(spec);
        pipeline::PipelineConfig narrow = config;
        narrow.offset_frames = 0;
        auto m = s.manifest;
        const auto dir = s2l::testing::scratch_dir("pipe_offset");
        synth::write_session(s, dir);
        m.transcript_path = dir / *m.transcript_path;
        const auto wide = pipeline::annotate_track(m, s.track, config);
        const auto thin = pipeline::annotate_track(m, s.track, narrow);
        CHECK(thin.labels.labeled_count() < wide.labels.labeled_count());
        for (std::size_t f = 0; f < thin.labels.n_frames(); ++f) {
            if (thin.labels.labels[f].zone != kUnlabeled) CHECK(wide.labels.labels[f].zone == thin.labels.labels[f].zone);
        }
    }
}

TEST_CASE("batch annotate records failures per session") {
    const auto dir = s2l::testing::scratch_dir("pipe_batch");
    synth::SynthSpec spec;
    auto manifests = synth::generate_dataset(spec, 2, dir / "data");
    std::filesystem::remove(manifests[1].audio_path);
    const auto report = pipeline::annotate_dataset(manifests, {}, dir / "out");
    REQUIRE(report.sessions.size() == 2);
    CHECK(report.sessions[0].ok);
    CHECK_FALSE(report.sessions[1].ok);
    CHECK_FALSE(report.all_ok());
    CHECK(std::filesystem::exists(dir / "out" / "synth_000.labels.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "synth_001.labels.csv"));
}

TEST_CASE("refine a session") {
    // Two zones whose embeddings separate cleanly; the label boundary is two frames late.
    std::vector<int> zones(40);
    std::vector<double> data(40);
    std::vector<std::size_t> frames(40);
    for (std::size_t f = 0; f < 40; ++f) {
        zones[f] = f < 22 ? 1 : 2;
        data[f] = f < 20 ? 0.0 : 5.0;
        frames[f] = f;
    }
    pipeline::RefineInputs in{s2l::testing::labels_from(zones), refine::EmbeddingSet(data, 1, frames), std::nullopt};
    pipeline::PipelineConfig c;
    c.k = 2;
    c.transition_halfwidth = 4;
    const auto r = pipeline::refine_session(in, c);
    CHECK(r.labels.labels[20].zone == 2);
    CHECK(r.labels.labels[21].zone == 2);
    CHECK(r.report.changed == 2);

    in.blinks = std::vector<bool>(40, false);
    (*in.blinks)[25] = true;
    const auto b = pipeline::refine_session(in, c);
    CHECK(b.propagated == 1);
}

#ifdef S2L_CLI_PATH
namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(S2L_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes and determinism") {
    const auto dir = s2l::testing::scratch_dir("cli");
    const auto d = dir.string();
    CHECK(run("") == 2);
    CHECK(run("annotate") == 2);
    CHECK(run("synth --bogus") == 2);
    REQUIRE(run("synth -o " + d + "/data -n 2 --miss-rate 0.2 --seed 3") == 0);
    CHECK(run("annotate " + d + "/data/manifest.json -o " + d + "/a1") == 0);
    CHECK(run("annotate " + d + "/data/manifest.json -o " + d + "/a2 -j 2") == 0);
    for (const char* f : {"synth_000.labels.csv", "synth_001.timeline.json"}) {
        CHECK(io::read_text(dir / "a1" / f) == io::read_text(dir / "a2" / f));
    }
    CHECK(run("annotate " + d + "/data/manifest.json -o " + d + "/a3 --offset-frames -2") == 2);
    CHECK(run("eval --manifest " + d + "/data/manifest.json --pred-dir " + d + "/a1") == 0);
    CHECK(run("split " + d + "/data/manifest.json --fractions 0.5,0.5,0.5") == 2);
    CHECK(run("illum dump -T 4000") == 0);
    std::filesystem::remove(dir / "data" / "synth_001.wav");
    CHECK(run("annotate " + d + "/data/manifest.json -o " + d + "/a4") == 1);
    CHECK(run("annotate " + d + "/missing.json -o " + d + "/a5") == 2);
}
#endif
