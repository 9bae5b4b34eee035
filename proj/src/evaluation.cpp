#include "gazedecouple/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gazedecouple/codec.hpp"
#include "gazedecouple/error.hpp"

namespace gazedecouple {

namespace fs = std::filesystem;
using nlohmann::json;

void EvalConfig::validate() const {
    if (!(fixation_level > 0.0 && fixation_level < 1.0)) {
        throw ConfigError("fixation_level must be in (0,1)");
    }
    if (n_splits < 1) {
        throw ConfigError("n_splits must be >= 1");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be > 0");
    }
}

SampleMetrics evaluate_pair(const std::string& sample_id, const Raster& pred_in, const Raster& gt,
                            const EvalConfig& cfg) {
    const Raster pred = resize_bilinear(pred_in, gt.size());
    SampleMetrics m;
    m.sample_id = sample_id;

    const Distribution gd = normalize_distribution(gt);
    const Distribution pd = normalize_distribution(pred);
    m.kldiv = kl_divergence(gd, pd, cfg.epsilon);
    m.sim = similarity(pd, gd);
    try {
        m.cc = pearson_cc(pred, gt);
    } catch (const InvalidArgument&) {
        m.cc.reset();
    }
    const FixationSet fix = extract_fixations(gt, cfg.fixation_level);
    m.auc_j = auc_judd(pred, fix);
    const BorjiResult b = auc_borji(pred, fix, cfg.n_splits, cfg.seed);
    m.auc_b = b.mean;
    m.auc_b_std = b.stddev;
    return m;
}

std::vector<std::pair<std::string, std::string>> list_png_files(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw InvalidArgument("not a directory: " + dir);
    }
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            out.emplace_back(entry.path().stem().string(), entry.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

EvalReport evaluate_directories(const std::string& pred_dir, const std::string& gt_dir, const EvalConfig& cfg) {
    cfg.validate();
    const auto preds = list_png_files(pred_dir);
    const auto gts = list_png_files(gt_dir);
    const std::map<std::string, std::string> pred_by_id(preds.begin(), preds.end());
    const std::map<std::string, std::string> gt_by_id(gts.begin(), gts.end());

    EvalReport report;
    report.config = cfg;
    for (const auto& [id, gt_path] : gts) {
        const auto it = pred_by_id.find(id);
        if (it == pred_by_id.end()) {
            report.missing_pred.push_back(id);
            continue;
        }
        try {
            report.samples.push_back(
                evaluate_pair(id, load_heatmap_file(it->second), load_heatmap_file(gt_path), cfg));
        } catch (const Error& e) {
            report.failed.emplace_back(id, e.what());
        }
    }
    for (const auto& [id, path] : preds) {
        if (!gt_by_id.contains(id)) {
            report.missing_gt.push_back(id);
        }
    }
    return report;
}

EvalAggregate aggregate(const std::vector<SampleMetrics>& samples) {
    EvalAggregate a;
    a.count = samples.size();
    if (samples.empty()) {
        return a;
    }
    double cc_sum = 0.0;
    for (const auto& s : samples) {
        a.kldiv += s.kldiv;
        a.sim += s.sim;
        a.auc_j += s.auc_j;
        a.auc_b += s.auc_b;
        if (s.cc) {
            cc_sum += *s.cc;
            ++a.cc_count;
        }
    }
    const double n = static_cast<double>(samples.size());
    a.kldiv /= n;
    a.sim /= n;
    a.auc_j /= n;
    a.auc_b /= n;
    if (a.cc_count > 0) {
        a.cc = cc_sum / static_cast<double>(a.cc_count);
    }
    return a;
}

json to_json(const EvalReport& report) {
    const auto& c = report.config;
    const auto with_config = [&](json j) {
        j["fixation_level"] = c.fixation_level;
        j["n_splits"] = c.n_splits;
        j["seed"] = c.seed;
        return j;
    };
    json samples = json::array();
    for (const auto& s : report.samples) {
        samples.push_back(with_config({{"sample_id", s.sample_id},
                                       {"kldiv", s.kldiv},
                                       {"cc", s.cc ? json(*s.cc) : json(nullptr)},
                                       {"sim", s.sim},
                                       {"auc_j", s.auc_j},
                                       {"auc_b", s.auc_b},
                                       {"auc_b_std", s.auc_b_std}}));
    }
    const EvalAggregate a = aggregate(report.samples);
    json failed = json::array();
    for (const auto& [id, why] : report.failed) {
        failed.push_back({{"sample_id", id}, {"reason", why}});
    }
    return json{{"samples", std::move(samples)},
                {"aggregate", with_config({{"count", a.count},
                                           {"kldiv", a.kldiv},
                                           {"cc", a.cc ? json(*a.cc) : json(nullptr)},
                                           {"cc_count", a.cc_count},
                                           {"sim", a.sim},
                                           {"auc_j", a.auc_j},
                                           {"auc_b", a.auc_b}})},
                {"epsilon", c.epsilon},
                {"unpaired", {{"missing_pred", report.missing_pred}, {"missing_gt", report.missing_gt}}},
                {"failed", std::move(failed)}};
}

std::string format_eval_table(const EvalReport& report) {
    std::size_t id_w = std::string("Sample").size();
    for (const auto& s : report.samples) {
        id_w = std::max(id_w, s.sample_id.size());
    }
    std::ostringstream os;
    const auto row = [&](const std::string& id, double kl, std::optional<double> cc, double sim, double aj,
                         double ab) {
        os << std::left << std::setw(static_cast<int>(id_w)) << id << std::right << std::fixed
           << std::setprecision(4) << std::setw(10) << kl << std::setw(10);
        if (cc) {
            os << *cc;
        } else {
            os << "n/a";
        }
        os << std::setw(10) << sim << std::setw(10) << aj << std::setw(10) << ab << '\n';
    };
    os << std::left << std::setw(static_cast<int>(id_w)) << "Sample" << std::right << std::setw(10) << "KLdiv"
       << std::setw(10) << "CC" << std::setw(10) << "SIM" << std::setw(10) << "AUC-J" << std::setw(10) << "AUC-B"
       << '\n';
    for (const auto& s : report.samples) {
        row(s.sample_id, s.kldiv, s.cc, s.sim, s.auc_j, s.auc_b);
    }
    const EvalAggregate a = aggregate(report.samples);
    os << std::string(id_w + 50, '-') << '\n';
    row("Mean", a.kldiv, a.cc, a.sim, a.auc_j, a.auc_b);
    os << "fixation_level=" << std::setprecision(3) << report.config.fixation_level
       << " n_splits=" << report.config.n_splits << " seed=" << report.config.seed << '\n';
    if (!report.missing_pred.empty() || !report.missing_gt.empty()) {
        os << "unpaired: " << report.missing_pred.size() << " without prediction, " << report.missing_gt.size()
           << " without ground truth\n";
    }
    return os.str();
}

// ---- weights ----

WeightsOutput compute_weights(const std::string& gt_dir, const LossConfig& cfg) {
    cfg.validate();
    const auto files = list_png_files(gt_dir);
    if (files.empty()) {
        throw InvalidArgument("no ground-truth maps in " + gt_dir);
    }
    FrequencyAccumulator acc;
    for (const auto& [id, path] : files) {
        acc.add(load_heatmap_file(path));
    }
    FrequencyMap freq = acc.finish();
    SpatialWeightMatrix w = spatial_weight_matrix(freq, cfg);
    return {std::move(freq), std::move(w), acc.count()};
}

void write_weights(const WeightsOutput& out, const LossConfig& cfg, const std::string& out_dir) {
    const fs::path root(out_dir);
    write_file_atomic((root / "frequency.png").string(), encode_raster_png16(out.frequency.raster()));
    std::vector<double> scaled(out.weights.values().begin(), out.weights.values().end());
    for (double& v : scaled) {
        v = std::clamp(v / cfg.w_max, 0.0, 1.0);
    }
    write_file_atomic((root / "weights.png").string(),
                      encode_raster_png16(Raster(out.weights.size(), std::move(scaled))));
    const json sidecar{{"w_min", cfg.w_min},
                       {"w_max", cfg.w_max},
                       {"n_samples", out.n_samples},
                       {"width", out.weights.size().width},
                       {"height", out.weights.size().height},
                       {"weights_encoding", "weight = value / 65535 * w_max"},
                       {"frequency_encoding", "frequency = value / 65535"}};
    write_file_atomic((root / "weights.json").string(), sidecar.dump(2) + "\n");
}

// ---- overlay ----

Bytes render_overlay(std::span<const std::uint8_t> image, const Raster& map, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidArgument("overlay alpha must be in [0,1]");
    }
    if (image.empty()) {
        throw DecodeError("empty image buffer");
    }
    cv::Mat buf(1, static_cast<int>(image.size()), CV_8U, const_cast<std::uint8_t*>(image.data()));
    cv::Mat frame = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (frame.empty()) {
        throw DecodeError("overlay frame could not be decoded");
    }
    const Raster m = resize_bilinear(map, {frame.cols, frame.rows});

    cv::Mat level(frame.rows, frame.cols, CV_8U);
    for (int y = 0; y < frame.rows; ++y) {
        for (int x = 0; x < frame.cols; ++x) {
            level.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(m.at(x, y) * 255.0));
        }
    }
    cv::Mat color;
    cv::applyColorMap(level, color, cv::COLORMAP_VIRIDIS);

    cv::Mat out(frame.rows, frame.cols, CV_8UC3);
    for (int y = 0; y < frame.rows; ++y) {
        for (int x = 0; x < frame.cols; ++x) {
            const double t = alpha * m.at(x, y);
            const auto& f = frame.at<cv::Vec3b>(y, x);
            const auto& c = color.at<cv::Vec3b>(y, x);
            auto& o = out.at<cv::Vec3b>(y, x);
            for (int ch = 0; ch < 3; ++ch) {
                o[ch] = static_cast<std::uint8_t>(std::lround(f[ch] * (1.0 - t) + c[ch] * t));
            }
        }
    }
    std::vector<uchar> png;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", out, png, params)) {
        throw Error("PNG encoding failed");
    }
    return Bytes(png.begin(), png.end());
}

} // namespace gazedecouple
