#include "gazedecouple/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gazedecouple/codec.hpp"
#include "gazedecouple/config.hpp"
#include "gazedecouple/error.hpp"
#include "gazedecouple/evaluation.hpp"
#include "gazedecouple/pipeline.hpp"

namespace gazedecouple {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string mock_dir;
    std::vector<std::string> sets;
};

struct UsageError : Error {
    using Error::Error;
};

CliConfig resolve_config(const GlobalOptions& g, const std::vector<std::string>& env) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : g.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (g.seed) {
        overrides.emplace_back("seed", std::to_string(*g.seed));
    }
    if (g.workers) {
        overrides.emplace_back("workers", std::to_string(*g.workers));
    }
    return load_config(g.config_file, env, overrides);
}

int cmd_annotate(const CliConfig& cfg, const GlobalOptions& g, const std::string& manifest_path,
                 const std::string& out_dir, std::ostream& out, std::ostream& err) {
    const auto manifest = load_manifest(manifest_path);
    if (manifest.empty()) {
        throw UsageError("manifest " + manifest_path + " lists no samples");
    }
    BackendPair backends;
    if (!g.mock_dir.empty()) {
        backends = mock_backends(g.mock_dir);
    } else {
        if (cfg.propose_url.empty() || cfg.segment_url.empty()) {
            throw UsageError("annotate needs --mock or both --propose-url and --segment-url");
        }
        backends = http_backends(cfg.propose_url, cfg.segment_url, cfg.retry(), cfg.max_in_flight);
    }
    const PipelineConfig pcfg = cfg.pipeline();
    out << "config_digest " << config_digest(pcfg) << '\n';

    std::size_t done = 0;
    const auto progress = [&](const SampleManifest& s, const std::string& error) {
        ++done;
        out << '[' << done << '/' << manifest.size() << "] " << s.subset << ' ' << s.sample_id;
        if (error.empty()) {
            out << " ok\n";
        } else {
            out << " skipped\n";
            err << "sample " << s.sample_id << " skipped: " << error << '\n';
        }
        out.flush();
    };
    const PipelineResult result = run_pipeline(manifest, pcfg, backends, out_dir, progress);

    out << result.samples.size() << " succeeded, " << result.failures.size() << " failed\n";
    if (result.samples.empty()) {
        err << "no sample succeeded\n";
        return kExitFailure;
    }
    const DatasetStats stats = compute_stats(result.samples);
    const std::string table = format_stats_table(stats);
    out << table;
    nlohmann::json report = to_json(stats);
    report["config"] = cfg.to_json();
    report["config_digest"] = config_digest(pcfg);
    json failures = json::array();
    for (const auto& f : result.failures) {
        failures.push_back({{"sample_id", f.sample_id}, {"reason", f.reason}});
    }
    report["failures"] = std::move(failures);
    write_file_atomic((fs::path(out_dir) / "stats.json").string(), report.dump(2) + "\n");
    write_file_atomic((fs::path(out_dir) / "stats.txt").string(), table);
    return kExitOk;
}

int cmd_eval(const CliConfig& cfg, const std::string& pred_dir, const std::string& gt_dir,
             const std::string& report_path, std::ostream& out, std::ostream& err) {
    const EvalReport report = evaluate_directories(pred_dir, gt_dir, cfg.eval());
    out << format_eval_table(report);
    for (const auto& [id, why] : report.failed) {
        err << "sample " << id << " failed: " << why << '\n';
    }
    const std::string text = to_json(report).dump(2) + "\n";
    if (report_path.empty() || report_path == "-") {
        out << text;
    } else {
        write_file_atomic(report_path, text);
    }
    return report.samples.empty() ? kExitFailure : kExitOk;
}

int cmd_weights(const CliConfig& cfg, const std::string& gt_dir, const std::string& out_dir, std::ostream& out) {
    if (list_png_files(gt_dir).empty()) {
        throw UsageError("no .png ground-truth maps in " + gt_dir);
    }
    const LossConfig loss = cfg.loss();
    const WeightsOutput w = compute_weights(gt_dir, loss);
    write_weights(w, loss, out_dir);
    out << "aggregated " << w.n_samples << " maps at " << to_string(w.weights.size()) << " into " << out_dir
        << '\n';
    return kExitOk;
}

int cmd_stats(const std::string& records_dir, const std::string& json_path, std::ostream& out) {
    fs::path dir(records_dir);
    if (fs::is_directory(dir / "records")) {
        dir /= "records";
    }
    if (!fs::is_directory(dir)) {
        throw UsageError("not a directory: " + records_dir);
    }
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") {
            files.push_back(e.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw UsageError("no records in " + dir.string());
    }
    std::vector<GazeSample> samples;
    samples.reserve(files.size());
    for (const auto& f : files) {
        samples.push_back(load_record(f));
    }
    const DatasetStats stats = compute_stats(samples);
    out << format_stats_table(stats);
    const std::string text = to_json(stats).dump(2) + "\n";
    if (json_path == "-") {
        out << text;
    } else if (!json_path.empty()) {
        write_file_atomic(json_path, text);
    }
    return kExitOk;
}

int cmd_overlay(const std::string& image, const std::string& map, const std::string& out_path, double alpha,
                std::ostream& out) {
    const Bytes png = render_overlay(read_file_bytes(image), load_heatmap_file(map), alpha);
    write_file_atomic(out_path, png);
    out << "wrote " << out_path << '\n';
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::vector<std::string>& env) {
    CLI::App app{"Object-level driver-gaze decoupling, saliency evaluation and center-bias weighting",
                 "gazedecouple"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_file, "YAML file of key: value settings")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every random draw");
    app.add_option("--workers", g.workers, "Worker threads for annotate");
    app.add_option("--mock", g.mock_dir, "Serve backends from a mock fixture directory");
    app.add_option("--set", g.sets, "Override a setting, KEY=VALUE (repeatable)");

    std::string manifest;
    std::string annotate_out;
    std::string propose_url;
    std::string segment_url;
    auto* annotate = app.add_subcommand("annotate", "Build object-level records from (image, heatmap) pairs");
    annotate->add_option("--manifest", manifest, "Newline-delimited JSON sample manifest")->required();
    annotate->add_option("--out", annotate_out, "Output directory")->required();
    annotate->add_option("--propose-url", propose_url, "Base URL of the region-proposal backend");
    annotate->add_option("--segment-url", segment_url, "Base URL of the segmentation backend");

    std::string pred_dir;
    std::string gt_dir;
    std::string report_path;
    auto* eval = app.add_subcommand("eval", "Score predicted maps against ground truth (KLdiv, CC, SIM, AUC-J, AUC-B)");
    eval->add_option("--pred", pred_dir, "Directory of predicted <id>.png maps")->required();
    eval->add_option("--gt", gt_dir, "Directory of ground-truth <id>.png maps")->required();
    eval->add_option("--report", report_path, "Write the JSON report here ('-' for stdout)");

    std::string weights_gt;
    std::string weights_out;
    auto* weights = app.add_subcommand("weights", "Aggregate gaze frequency and derive spatial loss weights");
    weights->add_option("--gt", weights_gt, "Directory of ground-truth maps")->required();
    weights->add_option("--out", weights_out, "Output directory")->required();

    std::string records_dir;
    std::string stats_json;
    auto* stats = app.add_subcommand("stats", "Annotation-quality table over a records directory");
    stats->add_option("--records", records_dir, "Annotate output directory or its records/ subdirectory")->required();
    stats->add_option("--json", stats_json, "Write the JSON report here ('-' for stdout)");

    std::string overlay_image;
    std::string overlay_map;
    std::string overlay_out;
    double overlay_alpha = kOverlayAlpha;
    auto* overlay = app.add_subcommand("overlay", "Blend a colorized map over a frame");
    overlay->add_option("--image", overlay_image, "Frame to draw on")->required();
    overlay->add_option("--map", overlay_map, "Grayscale map (8/16-bit PNG)")->required();
    overlay->add_option("--out", overlay_out, "Output PNG")->required();
    overlay->add_option("--alpha", overlay_alpha, "Opacity at a saturated map value")->check(CLI::Range(0.0, 1.0));

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("gazedecouple");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (!propose_url.empty()) {
            g.sets.push_back("propose_url=" + propose_url);
        }
        if (!segment_url.empty()) {
            g.sets.push_back("segment_url=" + segment_url);
        }
        const CliConfig cfg = resolve_config(g, env);

        if (annotate->parsed()) {
            return cmd_annotate(cfg, g, manifest, annotate_out, out, err);
        }
        if (eval->parsed()) {
            return cmd_eval(cfg, pred_dir, gt_dir, report_path, out, err);
        }
        if (weights->parsed()) {
            return cmd_weights(cfg, weights_gt, weights_out, out);
        }
        if (stats->parsed()) {
            return cmd_stats(records_dir, stats_json, out);
        }
        if (overlay->parsed()) {
            return cmd_overlay(overlay_image, overlay_map, overlay_out, overlay_alpha, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace gazedecouple
