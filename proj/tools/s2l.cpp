// s2l: batch gaze-zone labelling from speech-marked recordings.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "s2l/error.hpp"
#include "s2l/eval.hpp"
#include "s2l/illum.hpp"
#include "s2l/io.hpp"
#include "s2l/pipeline.hpp"
#include "s2l/sessions.hpp"
#include "s2l/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Flag storage for pipeline tunables; flags that were given override the config file.
struct ConfigFlags {
    s2l::pipeline::PipelineConfig defaults;
    std::string config_path;
    double window_s = defaults.window_s;
    double hop_s = defaults.hop_s;
    std::vector<double> band{defaults.band_lo_hz, defaults.band_hi_hz};
    double ratio_threshold = defaults.ratio_threshold;
    std::string window_function = "hann";
    int offset_frames = defaults.offset_frames;
    double min_confidence = defaults.min_confidence;
    int transition_halfwidth = defaults.transition_halfwidth;
    std::size_t k = defaults.k;
    std::uint64_t seed = defaults.seed;
    std::size_t max_iters = defaults.max_iters;
    std::size_t n_init = defaults.n_init;
    std::string backend = "auto";
    std::string stt_command;
    double stt_timeout_s = defaults.stt_timeout_s;
    std::size_t jobs = 1;
    bool corpus_wide = false;

    std::vector<std::pair<CLI::Option*, std::function<void(s2l::pipeline::PipelineConfig&)>>> setters;

    template <typename T, typename Apply>
    void add(CLI::App* app, const std::string& name, T& target, const std::string& help, Apply apply) {
        auto* opt = app->add_option(name, target, help)->capture_default_str();
        setters.emplace_back(opt, apply);
    }

    void add_annotate(CLI::App* app) {
        add(app, "--window-s", window_s, "Analysis window length in seconds for the voice-band scan",
            [this](auto& c) { c.window_s = window_s; });
        add(app, "--hop-s", hop_s, "Hop between analysis windows in seconds", [this](auto& c) { c.hop_s = hop_s; });
        auto* band_opt = app->add_option("--band", band,
                                         "Voice band LO,HI in Hz (human voice range 300-3000 Hz)")
                             ->delimiter(',')
                             ->expected(2)
                             ->capture_default_str();
        setters.emplace_back(band_opt, [this](auto& c) {
            c.band_lo_hz = band[0];
            c.band_hi_hz = band[1];
        });
        add(app, "--ratio-threshold", ratio_threshold, "Minimum in-band energy ratio for a voiced window",
            [this](auto& c) { c.ratio_threshold = ratio_threshold; });
        auto* wf = app->add_option("--window-function", window_function, "Spectral taper: hann | rectangular")
                       ->check(CLI::IsMember({"hann", "rectangular"}))
                       ->capture_default_str();
        setters.emplace_back(wf, [this](auto& c) {
            c.window = window_function == "hann" ? s2l::audio::WindowFunction::Hann
                                                 : s2l::audio::WindowFunction::Rectangular;
        });
        add(app, "--offset-frames", offset_frames,
            "Frames labelled before and after each detected utterance (empirical 10-frame offset)",
            [this](auto& c) { c.offset_frames = offset_frames; });
        add(app, "--min-confidence", min_confidence, "Minimum transcript confidence for a keyword match",
            [this](auto& c) { c.min_confidence = min_confidence; });
        add(app, "--backend", backend, "STT backend: auto | sidecar | tone-spotter | external",
            [this](auto& c) { c.backend = s2l::pipeline::backend_from_string(backend); });
        add(app, "--stt-command", stt_command,
            std::string("External STT command; the WAV path is appended (falls back to $") +
                s2l::pipeline::kSttCommandEnv + ")",
            [this](auto& c) { c.stt_command = stt_command; });
        add(app, "--stt-timeout-s", stt_timeout_s, "Timeout for the external STT command",
            [this](auto& c) { c.stt_timeout_s = stt_timeout_s; });
    }

    void add_refine(CLI::App* app) {
        add(app, "--transition-halfwidth", transition_halfwidth,
            "Frames on each side of a label boundary eligible for reassignment (tied to the 10-frame offset)",
            [this](auto& c) { c.transition_halfwidth = transition_halfwidth; });
        add(app, "-k,--clusters", k, "Number of k-means clusters (k=9, one per gaze zone)",
            [this](auto& c) { c.k = k; });
        add(app, "--seed", seed, "Seed for k-means++ initialization", [this](auto& c) { c.seed = seed; });
        add(app, "--max-iters", max_iters, "Maximum Lloyd iterations", [this](auto& c) { c.max_iters = max_iters; });
        add(app, "--n-init", n_init, "k-means restarts; the lowest inertia wins", [this](auto& c) { c.n_init = n_init; });
        auto* cw = app->add_flag("--corpus-wide", corpus_wide, "Cluster all sessions together instead of per session");
        setters.emplace_back(cw, [this](auto& c) { c.corpus_wide = corpus_wide; });
    }

    void add_common(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file; flags given on the command line win")
            ->check(CLI::ExistingFile);
        add(app, "-j,--jobs", jobs, "Sessions processed in parallel", [this](auto& c) { c.jobs = jobs; });
    }

    s2l::pipeline::PipelineConfig resolve() const {
        auto c = defaults;
        if (!config_path.empty()) c = s2l::pipeline::config_from_json(s2l::io::read_text(config_path), c, config_path);
        for (const auto& [opt, apply] : setters) {
            if (opt->count() > 0) apply(c);
        }
        c.validate();
        return c;
    }
};

void print_session_failures(const s2l::pipeline::BatchReport& report) {
    for (const auto& s : report.sessions) {
        if (!s.ok) std::cerr << "session " << s.session_id << " failed: " << s.error << '\n';
    }
}

int cmd_annotate(const std::string& manifest, const fs::path& out_dir, const ConfigFlags& flags) {
    const auto config = flags.resolve();
    const auto sessions = s2l::sessions::load_dataset(manifest);
    const auto report = s2l::pipeline::annotate_dataset(sessions, config, out_dir);
    s2l::io::write_atomic(out_dir / "annotate_report.json", report.to_json());
    print_session_failures(report);
    std::size_t ok = 0;
    for (const auto& s : report.sessions) ok += s.ok;
    std::cout << "annotated " << ok << "/" << report.sessions.size() << " sessions into " << out_dir.string() << '\n';
    return report.all_ok() ? kExitOk : kExitFailure;
}

int cmd_refine(const std::string& manifest, const fs::path& labels_dir, const std::string& emb_dir,
               const std::string& blinks_dir, const fs::path& out_dir, const ConfigFlags& flags) {
    const auto config = flags.resolve();
    const auto sessions = s2l::sessions::load_dataset(manifest);
    std::optional<fs::path> emb;
    std::optional<fs::path> blinks;
    if (!emb_dir.empty()) emb = emb_dir;
    if (!blinks_dir.empty()) blinks = blinks_dir;
    const auto report = s2l::pipeline::refine_dataset(sessions, config, labels_dir, emb, blinks, out_dir);
    s2l::io::write_atomic(out_dir / "refine_report.json", report.to_json());
    print_session_failures(report);
    return report.all_ok() ? kExitOk : kExitFailure;
}

int cmd_eval(const std::string& truth, const std::string& pred, const std::string& manifest,
             const std::string& pred_dir, const std::string& suffix, bool merge7, const std::string& out) {
    s2l::eval::ConfusionMatrix total;
    auto accumulate = [&](s2l::FrameLabels t, s2l::FrameLabels p) {
        if (merge7) {
            t = s2l::eval::merge_zones_7(t);
            p = s2l::eval::merge_zones_7(p);
        }
        const auto cm = s2l::eval::confusion(t, p);
        if (total.k == 0) {
            total = cm;
            return;
        }
        if (cm.k != total.k) throw s2l::ArgumentError("sessions use different class counts");
        for (std::size_t i = 0; i < cm.counts.size(); ++i) total.counts[i] += cm.counts[i];
        total.excluded += cm.excluded;
    };

    if (!manifest.empty()) {
        for (const auto& m : s2l::sessions::load_dataset(manifest)) {
            if (!m.truth_labels_path) throw s2l::ArgumentError("session " + m.session_id + " has no truth_labels_path");
            accumulate(s2l::annotate::load_labels(*m.truth_labels_path, m.fps),
                       s2l::annotate::load_labels(fs::path(pred_dir) / (m.session_id + suffix), m.fps));
        }
    } else {
        accumulate(s2l::annotate::load_labels(truth), s2l::annotate::load_labels(pred));
    }
    const auto text = s2l::eval::metrics_json(total, merge7);
    std::cout << s2l::eval::metrics_table(total, merge7);
    if (out.empty()) {
        std::cout << text;
    } else {
        s2l::io::write_atomic(out, text);
    }
    return kExitOk;
}

json vec_json(const s2l::illum::Vec3& v) { return json::array({v[0], v[1], v[2]}); }

s2l::illum::Vec3 to_vec3(const std::vector<double>& v) { return {v.at(0), v.at(1), v.at(2)}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"s2l - automatic gaze-zone labels from speech-marked recordings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    // annotate
    ConfigFlags annotate_flags;
    std::string annotate_manifest;
    std::string annotate_out;
    auto* annotate = app.add_subcommand("annotate", "STT backend -> keyword alignment -> rectification -> frame labels");
    annotate->add_option("manifest", annotate_manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
    annotate->add_option("-o,--out", annotate_out, "Output directory for label CSVs and timeline dumps")->required();
    annotate_flags.add_common(annotate);
    annotate_flags.add_annotate(annotate);

    // refine
    ConfigFlags refine_flags;
    std::string refine_manifest;
    std::string refine_labels;
    std::string refine_emb;
    std::string refine_blinks;
    std::string refine_out;
    auto* refine = app.add_subcommand("refine", "k-means reassignment of transition frames and blink propagation");
    refine->add_option("manifest", refine_manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
    refine->add_option("--labels", refine_labels, "Directory holding <session>.labels.csv")->required()->check(CLI::ExistingDirectory);
    refine->add_option("--embeddings", refine_emb, "Directory holding <session>.emb (default: manifest embeddings_path)");
    refine->add_option("--blinks", refine_blinks, "Directory holding <session>.blinks.csv (frame,blink)");
    refine->add_option("-o,--out", refine_out, "Output directory")->required();
    refine_flags.add_common(refine);
    refine_flags.add_refine(refine);

    // synth
    std::string synth_spec;
    std::string synth_out;
    std::size_t synth_count = 1;
    std::optional<std::uint64_t> synth_seed;
    std::optional<double> synth_miss;
    std::optional<double> synth_sub;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
    synth->add_option("--spec", synth_spec, "Synthetic session spec JSON (defaults used when omitted)")->check(CLI::ExistingFile);
    synth->add_option("-o,--out", synth_out, "Output directory")->required();
    synth->add_option("-n,--sessions", synth_count, "Number of sessions")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Override the spec seed");
    synth->add_option("--miss-rate", synth_miss, "Override the transcript miss rate");
    synth->add_option("--substitute-rate", synth_sub, "Override the transcript substitution rate");

    // split
    std::string split_manifest;
    std::vector<double> split_fractions{0.60, 0.245, 0.155};
    std::uint64_t split_seed = 42;
    std::string split_out;
    auto* split = app.add_subcommand("split", "Subject-disjoint train/val/test split");
    split->add_option("manifest", split_manifest, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
    split->add_option("--fractions", split_fractions, "TRAIN,VAL,TEST fractions (default mirrors 203/83/52 of 338 subjects)")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();
    split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
    split->add_option("-o,--out", split_out, "Write split JSON here instead of stdout");

    // eval
    std::string eval_truth;
    std::string eval_pred;
    std::string eval_manifest;
    std::string eval_pred_dir;
    std::string eval_suffix = ".labels.csv";
    bool eval_merge = false;
    std::string eval_out;
    auto* evalc = app.add_subcommand("eval", "Accuracy, macro-F1 and confusion matrix of frame labels");
    auto* truth_opt = evalc->add_option("--truth", eval_truth, "Ground-truth label CSV")->check(CLI::ExistingFile);
    auto* pred_opt = evalc->add_option("--pred", eval_pred, "Predicted label CSV")->check(CLI::ExistingFile);
    auto* man_opt = evalc->add_option("--manifest", eval_manifest, "Manifest whose sessions carry truth_labels_path")
                        ->check(CLI::ExistingFile);
    auto* pdir_opt = evalc->add_option("--pred-dir", eval_pred_dir, "Directory of predicted label CSVs")
                         ->check(CLI::ExistingDirectory);
    evalc->add_option("--suffix", eval_suffix, "Predicted file suffix in --pred-dir")->capture_default_str();
    evalc->add_flag("--merge7", eval_merge, "Merge zones 1+2 and 5+6 (7-class scheme) before scoring");
    evalc->add_option("-o,--out", eval_out, "Write metrics JSON here");
    truth_opt->needs(pred_opt);
    pred_opt->needs(truth_opt);
    man_opt->needs(pdir_opt);
    truth_opt->excludes(man_opt);

    // illum
    auto* illum = app.add_subcommand("illum", "Chromaticity model utilities");
    illum->require_subcommand(1);
    s2l::illum::ChromaticityParams defaults;
    std::vector<double> lambda{defaults.wavelength_nm.begin(), defaults.wavelength_nm.end()};
    std::vector<double> reflect{defaults.reflectance.begin(), defaults.reflectance.end()};
    std::vector<double> delta{defaults.delta_amplitude.begin(), defaults.delta_amplitude.end()};
    double temperature = defaults.temperature_k;
    bool relax_bands = false;
    auto add_params = [&](CLI::App* sub) {
        sub->add_option("--lambda-nm", lambda, "R,G,B wavelengths in nm (band midpoints)")
            ->delimiter(',')->expected(3)->capture_default_str();
        sub->add_option("--reflectance", reflect, "Spectral reflectance per channel")
            ->delimiter(',')->expected(3)->capture_default_str();
        sub->add_option("--delta", delta, "Dirac-delta amplitude per channel")
            ->delimiter(',')->expected(3)->capture_default_str();
    };
    auto* dump = illum->add_subcommand("dump", "Print chromaticity c and its factors A (robust), B (temperature) as JSON");
    add_params(dump);
    dump->add_option("-T,--temperature-k", temperature, "Color temperature in kelvin")->capture_default_str();
    dump->add_flag("--relax-bands", relax_bands, "Skip the per-channel wavelength band check");

    s2l::illum::KernelInitSpec kspec;
    std::string kernel_spec_file;
    std::string kernel_out;
    std::vector<std::size_t> kshape{kspec.shape};
    auto* kernel = illum->add_subcommand("kernel", "Initialize and export an illumination kernel");
    add_params(kernel);
    kernel->add_option("--spec", kernel_spec_file, "Kernel spec JSON {shape, channel_axis, t_mean_k, t_std_k, seed}")
        ->check(CLI::ExistingFile);
    kernel->add_option("--shape", kshape, "Kernel shape, comma separated")->delimiter(',')->capture_default_str();
    kernel->add_option("--channel-axis", kspec.channel_axis, "Axis of extent 3 holding R,G,B")->capture_default_str();
    kernel->add_option("--t-mean-k", kspec.t_mean_k, "Mean color temperature")->capture_default_str();
    kernel->add_option("--t-std-k", kspec.t_std_k, "Color temperature standard deviation")->capture_default_str();
    kernel->add_option("--seed", kspec.seed, "Sampling seed")->capture_default_str();
    kernel->add_option("-o,--out", kernel_out, "Output kernel file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*annotate) return cmd_annotate(annotate_manifest, annotate_out, annotate_flags);
        if (*refine) {
            return cmd_refine(refine_manifest, refine_labels, refine_emb, refine_blinks, refine_out, refine_flags);
        }
        if (*synth) {
            s2l::synth::SynthSpec spec;
            if (!synth_spec.empty()) spec = s2l::synth::spec_from_json(s2l::io::read_text(synth_spec), synth_spec);
            if (synth_seed) spec.seed = *synth_seed;
            if (synth_miss) spec.miss_rate = *synth_miss;
            if (synth_sub) spec.substitute_rate = *synth_sub;
            const auto manifests = s2l::synth::generate_dataset(spec, synth_count, synth_out);
            std::cout << "wrote " << manifests.size() << " sessions to " << synth_out << '\n';
            return kExitOk;
        }
        if (*split) {
            if (split_fractions.size() != 3) throw s2l::ArgumentError("--fractions needs three values");
            const auto result = s2l::sessions::split_subjects(
                s2l::sessions::load_dataset(split_manifest),
                {split_fractions[0], split_fractions[1], split_fractions[2]}, split_seed);
            const auto text = s2l::sessions::split_to_json(result);
            if (split_out.empty()) {
                std::cout << text;
            } else {
                s2l::io::write_atomic(split_out, text);
            }
            return kExitOk;
        }
        if (*evalc) {
            if (eval_truth.empty() && eval_manifest.empty()) {
                std::cerr << "eval: give --truth/--pred or --manifest/--pred-dir\n";
                return kExitUsage;
            }
            return cmd_eval(eval_truth, eval_pred, eval_manifest, eval_pred_dir, eval_suffix, eval_merge, eval_out);
        }
        s2l::illum::ChromaticityParams params{to_vec3(lambda), to_vec3(reflect), to_vec3(delta), temperature};
        if (*dump) {
            const auto c = s2l::illum::chromaticity(params, {}, !relax_bands);
            const auto d = s2l::illum::decompose(params, {}, !relax_bands);
            json doc = {{"params",
                         {{"lambda_nm", vec_json(params.wavelength_nm)},
                          {"reflectance", vec_json(params.reflectance)},
                          {"delta", vec_json(params.delta_amplitude)},
                          {"temperature_k", params.temperature_k}}},
                        {"k2_mK", s2l::illum::RadiationConstants{}.k2()},
                        {"c", vec_json(c)},
                        {"A", vec_json(d.robust)},
                        {"B", vec_json(d.dependent)}};
            std::cout << doc.dump(2) << '\n';
            return kExitOk;
        }
        if (*kernel) {
            if (!kernel_spec_file.empty()) {
                const auto doc = json::parse(s2l::io::read_text(kernel_spec_file));
                kspec.shape = doc.value("shape", kspec.shape);
                kspec.channel_axis = doc.value("channel_axis", kspec.channel_axis);
                kspec.t_mean_k = doc.value("t_mean_k", kspec.t_mean_k);
                kspec.t_std_k = doc.value("t_std_k", kspec.t_std_k);
                kspec.seed = doc.value("seed", kspec.seed);
            } else {
                kspec.shape = kshape;
            }
            const auto k = s2l::illum::init_kernel(kspec, params);
            s2l::illum::export_kernel(k, kernel_out);
            std::cout << "wrote kernel with " << k.values.size() << " values to " << kernel_out << '\n';
            return kExitOk;
        }
    } catch (const s2l::ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
