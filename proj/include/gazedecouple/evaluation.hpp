#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazedecouple/metrics.hpp"
#include "gazedecouple/objectives.hpp"
#include "gazedecouple/raster.hpp"

namespace gazedecouple {

struct EvalConfig {
    double fixation_level = kDefaultFixationLevel;
    int n_splits = kDefaultBorjiSplits;
    std::uint64_t seed = 0;
    double epsilon = kDefaultEpsilon;

    void validate() const;
};

struct SampleMetrics {
    std::string sample_id;
    double kldiv = 0.0;
    std::optional<double> cc; // undefined for a constant map
    double sim = 0.0;
    double auc_j = 0.0;
    double auc_b = 0.0;
    double auc_b_std = 0.0;
};

/// All five metrics for one pair. The prediction is bilinearly resized to the ground
/// truth's resolution first.
SampleMetrics evaluate_pair(const std::string& sample_id, const Raster& pred, const Raster& gt,
                            const EvalConfig& cfg);

struct EvalReport {
    EvalConfig config;
    std::vector<SampleMetrics> samples;
    std::vector<std::string> missing_pred; // gt ids without a prediction
    std::vector<std::string> missing_gt;   // prediction ids without ground truth
    std::vector<std::pair<std::string, std::string>> failed; // id, reason
};

/// Pairs <id>.png files of the two directories by id.
EvalReport evaluate_directories(const std::string& pred_dir, const std::string& gt_dir, const EvalConfig& cfg);

struct EvalAggregate {
    std::size_t count = 0;
    double kldiv = 0.0;
    std::optional<double> cc;
    std::size_t cc_count = 0;
    double sim = 0.0;
    double auc_j = 0.0;
    double auc_b = 0.0;
};

EvalAggregate aggregate(const std::vector<SampleMetrics>& samples);

nlohmann::json to_json(const EvalReport& report);
std::string format_eval_table(const EvalReport& report);

/// Sorted <stem, path> list of the .png files directly inside dir.
std::vector<std::pair<std::string, std::string>> list_png_files(const std::string& dir);

// ---- center-bias prior ----

struct WeightsOutput {
    FrequencyMap frequency;
    SpatialWeightMatrix weights;
    std::size_t n_samples = 0;
};

/// Aggregates every ground-truth map in gt_dir and derives the spatial weights.
WeightsOutput compute_weights(const std::string& gt_dir, const LossConfig& cfg);

/// frequency.png and weights.png (16-bit; weights stored as W / w_max) plus weights.json.
void write_weights(const WeightsOutput& out, const LossConfig& cfg, const std::string& out_dir);

// ---- overlays ----

inline constexpr double kOverlayAlpha = 0.6;

/// Viridis-colorized map blended over the frame with per-pixel opacity alpha * value.
/// The map is bilinearly resized to the frame. Output is an 8-bit BGR PNG.
Bytes render_overlay(std::span<const std::uint8_t> image, const Raster& map, double alpha = kOverlayAlpha);

} // namespace gazedecouple
