#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazedecouple/backends.hpp"
#include "gazedecouple/raster.hpp"
#include "gazedecouple/region_validation.hpp"

namespace gazedecouple {

struct SampleManifest {
    std::string sample_id;
    std::string subset;
    std::string image_path;
    std::string heatmap_path;

    bool operator==(const SampleManifest&) const = default;
};

/// Newline-delimited JSON, one SampleManifest per line. Relative paths are resolved
/// against the manifest's directory. Sample ids must be unique and usable as file names.
std::vector<SampleManifest> load_manifest(const std::string& path);

struct PipelineConfig {
    ValidationConfig validation;
    FallbackConfig fallback;
    double iou_threshold = kDefaultIouThreshold;
    bool segment_with_bbox = false;
    int workers = 1;

    void validate() const;
};

/// Hash of every threshold and the prompt version; embedded in each record.
std::string config_digest(const PipelineConfig& cfg);

struct GazeSample {
    SampleManifest manifest;
    Raster global_map;
    std::vector<ValidatedRegion> regions;
    std::vector<Raster> region_maps; // parallel to regions
};

/// Proposal, cascaded segmentation, validation and decoupling for one sample.
GazeSample process_sample(const SampleManifest& sample, const PipelineConfig& cfg, const BackendPair& backends);

/// Writes records/<id>.json, masks/<id>_<k>.png and region_maps/<id>_<k>.png under output_dir.
void write_record(const GazeSample& sample, const std::string& output_dir, const std::string& digest);

/// Reads a record written by write_record and re-checks its invariants.
/// Region maps come back as stored, i.e. quantized to 16 bits.
GazeSample load_record(const std::string& record_path);

struct SampleFailure {
    std::string sample_id;
    std::string reason;
};

struct PipelineResult {
    std::vector<GazeSample> samples; // manifest order
    std::vector<SampleFailure> failures;
};

using ProgressFn = std::function<void(const SampleManifest&, const std::string& error)>;

/// Runs every sample on a pool of cfg.workers threads. A failing sample is recorded in
/// failures and does not affect the others.
PipelineResult run_pipeline(std::span<const SampleManifest> manifest, const PipelineConfig& cfg,
                            const BackendPair& backends, const std::string& output_dir,
                            const ProgressFn& progress = {});

struct SubsetStats {
    std::string subset;
    std::size_t sample_count = 0;
    std::size_t region_count = 0;
    std::size_t attended_region_count = 0; // non-hallucinated
    double avg_regions_per_sample = 0.0;
    /// Mean mu over non-hallucinated regions.
    double mean_attn_intensity = 0.0;
    /// Mean over samples (with at least one attended region) of their mean mu.
    double mean_attn_intensity_per_sample = 0.0;
};

struct DatasetStats {
    std::vector<SubsetStats> subsets; // sorted by name
    SubsetStats overall;
};

/// Throws InvalidArgument on empty input.
DatasetStats compute_stats(std::span<const GazeSample> samples);

nlohmann::json to_json(const DatasetStats& stats);
std::string format_stats_table(const DatasetStats& stats);

} // namespace gazedecouple
