#include "gazedecouple/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "gazedecouple/codec.hpp"
#include "gazedecouple/error.hpp"
#include "gazedecouple/prompt.hpp"

namespace gazedecouple {

namespace fs = std::filesystem;

namespace {

std::string required_string(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw InvalidArgument(where + ": field '" + key + "' must be a non-empty string");
    }
    return it->get<std::string>();
}

bool safe_id(const std::string& id) {
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    }) && id != "." && id != "..";
}

std::string resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) {
        path = base / path;
    }
    return fs::absolute(path).lexically_normal().string();
}

std::string mask_file(const std::string& id, std::size_t k) {
    return "masks/" + id + "_" + std::to_string(k) + ".png";
}

std::string region_map_file(const std::string& id, std::size_t k) {
    return "region_maps/" + id + "_" + std::to_string(k) + ".png";
}

} // namespace

std::vector<SampleManifest> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open manifest " + path);
    }
    const fs::path base = fs::path(path).parent_path();
    std::vector<SampleManifest> out;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        const std::string where = path + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InvalidArgument(where + ": " + e.what());
        }
        if (!j.is_object()) {
            throw InvalidArgument(where + ": expected a JSON object");
        }
        SampleManifest m{required_string(j, "sample_id", where), required_string(j, "subset", where),
                         resolve(base, required_string(j, "image_path", where)),
                         resolve(base, required_string(j, "heatmap_path", where))};
        if (!safe_id(m.sample_id)) {
            throw InvalidArgument(where + ": sample_id '" + m.sample_id + "' is not a safe file name");
        }
        if (!seen.insert(m.sample_id).second) {
            throw InvalidArgument(where + ": duplicate sample_id '" + m.sample_id + "'");
        }
        out.push_back(std::move(m));
    }
    return out;
}

void PipelineConfig::validate() const {
    validation.validate();
    fallback.validate();
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw ConfigError("iou_threshold must be in (0,1]");
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
}

std::string config_digest(const PipelineConfig& cfg) {
    const json j{{"tau_attn", cfg.validation.tau_attn},
                 {"tau_high", cfg.fallback.tau_high},
                 {"tau_low", cfg.fallback.tau_low},
                 {"n_fallback", cfg.fallback.n_fallback},
                 {"iou_threshold", cfg.iou_threshold},
                 {"segment_with_bbox", cfg.segment_with_bbox},
                 {"prompt_version", kPromptVersion},
                 {"prompt_sha256", sha256_hex(kCotPrompt)}};
    return sha256_hex(j.dump());
}

GazeSample process_sample(const SampleManifest& sample, const PipelineConfig& cfg, const BackendPair& backends) {
    Bytes rgb = read_file_bytes(sample.image_path);
    Bytes heat = read_file_bytes(sample.heatmap_path);
    Raster global = load_heatmap(heat);

    const ProposalRequest proposal_request{std::move(rgb), std::move(heat), std::string(kCotPrompt)};
    const auto proposals = propose_regions(proposal_request, *backends.proposer, cfg.iou_threshold);

    GazeSample out{sample, global, {}, {}};
    for (const auto& p : proposals) {
        SegmentationRequest req{proposal_request.rgb_image, p.description, std::nullopt};
        if (cfg.segment_with_bbox) {
            req.bbox = p.bbox;
        }
        const auto candidates = segment_cascaded(req, cfg.fallback, *backends.segmenter, global.size());
        ValidatedRegion region = validate_region(p, candidates, global, cfg.validation);
        out.region_maps.push_back(hadamard_decouple(global, region.final_mask));
        out.regions.push_back(std::move(region));
    }
    return out;
}

void write_record(const GazeSample& sample, const std::string& output_dir, const std::string& digest) {
    const fs::path root(output_dir);
    const std::string& id = sample.manifest.sample_id;
    json regions = json::array();
    for (std::size_t k = 0; k < sample.regions.size(); ++k) {
        const auto& r = sample.regions[k];
        const auto& b = r.proposal.bbox;
        write_file_atomic((root / mask_file(id, k)).string(), encode_mask_png(r.final_mask));
        write_file_atomic((root / region_map_file(id, k)).string(), encode_raster_png16(sample.region_maps[k]));
        regions.push_back({{"bbox", {b.x_min, b.y_min, b.x_max, b.y_max}},
                           {"description", r.proposal.description},
                           {"cause", r.proposal.cause},
                           {"status", to_string(r.status)},
                           {"mu_attn", r.mu_attn},
                           {"candidate_mu", r.candidate_mu},
                           {"mask_file", mask_file(id, k)},
                           {"region_map_file", region_map_file(id, k)}});
    }
    const json record{{"sample_id", id},
                      {"subset", sample.manifest.subset},
                      {"image", sample.manifest.image_path},
                      {"heatmap", sample.manifest.heatmap_path},
                      {"config_digest", digest},
                      {"regions", std::move(regions)}};
    write_file_atomic((root / "records" / (id + ".json")).string(), record.dump(2) + "\n");
}

GazeSample load_record(const std::string& record_path) {
    const fs::path path(record_path);
    const fs::path root = path.parent_path().parent_path();
    json j;
    {
        std::ifstream in(path);
        if (!in) {
            throw RecordError("cannot open record " + record_path);
        }
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw RecordError(record_path + ": " + e.what());
        }
    }
    const auto fail = [&](const std::string& msg) { return RecordError(record_path + ": " + msg); };

    try {
        SampleManifest m{j.at("sample_id").get<std::string>(), j.at("subset").get<std::string>(),
                         j.at("image").get<std::string>(), j.at("heatmap").get<std::string>()};
        j.at("config_digest").get<std::string>();
        const std::string heatmap_path = resolve(root, m.heatmap_path);
        Raster global = [&] {
            try {
                return load_heatmap_file(heatmap_path);
            } catch (const Error& e) {
                throw fail(std::string("global map: ") + e.what());
            }
        }();

        GazeSample sample{m, global, {}, {}};
        for (const auto& r : j.at("regions")) {
            const auto& b = r.at("bbox");
            if (!b.is_array() || b.size() != 4) {
                throw fail("bbox must have four entries");
            }
            RegionProposal proposal{{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()},
                                    r.at("description").get<std::string>(),
                                    r.at("cause").get<std::string>()};
            const ValidationStatus status = parse_validation_status(r.at("status").get<std::string>());
            const double mu = r.at("mu_attn").get<double>();
            std::vector<double> candidate_mu;
            if (r.contains("candidate_mu")) {
                candidate_mu = r.at("candidate_mu").get<std::vector<double>>();
            }

            const std::string mask_path = (root / r.at("mask_file").get<std::string>()).string();
            const std::string map_path = (root / r.at("region_map_file").get<std::string>()).string();
            BinaryMask mask = [&] {
                try {
                    return decode_mask_image(read_file_bytes(mask_path));
                } catch (const Error& e) {
                    throw fail(std::string("mask: ") + e.what());
                }
            }();
            Raster region_map = [&] {
                try {
                    return load_heatmap_file(map_path);
                } catch (const Error& e) {
                    throw fail(std::string("region map: ") + e.what());
                }
            }();
            if (mask.size() != global.size() || region_map.size() != global.size()) {
                throw fail("raster sizes disagree with the global map");
            }

            const Raster expected = hadamard_decouple(global, mask);
            const auto ev = expected.values();
            const auto rv = region_map.values();
            for (std::size_t i = 0; i < ev.size(); ++i) {
                if (rv[i] != quantize16(ev[i])) {
                    throw fail("region map differs from the decoupled global map at pixel " + std::to_string(i));
                }
            }
            const double recomputed = mean_attention_intensity(mask, global);
            if (std::abs(recomputed - mu) > 1e-12) {
                throw fail("mu_attn " + std::to_string(mu) + " does not match recomputed " +
                           std::to_string(recomputed));
            }
            if (status == ValidationStatus::Hallucinated && (mask.any() || mu != 0.0)) {
                throw fail("hallucinated region must have an empty mask and zero mu_attn");
            }
            sample.regions.push_back({std::move(proposal), std::move(mask), mu, status, std::move(candidate_mu)});
            sample.region_maps.push_back(std::move(region_map));
        }
        return sample;
    } catch (const json::exception& e) {
        throw fail(std::string("schema violation: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw fail(std::string("schema violation: ") + e.what());
    }
}

PipelineResult run_pipeline(std::span<const SampleManifest> manifest, const PipelineConfig& cfg,
                            const BackendPair& backends, const std::string& output_dir, const ProgressFn& progress) {
    cfg.validate();
    const std::string digest = config_digest(cfg);
    fs::create_directories(output_dir);

    std::vector<std::optional<GazeSample>> done(manifest.size());
    std::vector<std::string> errors(manifest.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;

    const auto worker = [&] {
        for (std::size_t i = next++; i < manifest.size(); i = next++) {
            try {
                GazeSample s = process_sample(manifest[i], cfg, backends);
                write_record(s, output_dir, digest);
                done[i] = std::move(s);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (errors[i].empty()) {
                    errors[i] = "unknown error";
                }
            }
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(manifest[i], errors[i]);
            }
        }
    };

    const int n = std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(1, manifest.size())));
    {
        std::vector<std::jthread> pool;
        for (int t = 1; t < n; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }

    PipelineResult result;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (done[i]) {
            result.samples.push_back(std::move(*done[i]));
        } else {
            result.failures.push_back({manifest[i].sample_id, errors[i]});
        }
    }
    return result;
}

// ---- statistics ----

namespace {

struct Tally {
    std::size_t samples = 0;
    std::size_t regions = 0;
    std::size_t attended = 0;
    long double mu_sum = 0.0L;
    std::size_t samples_with_attended = 0;
    long double per_sample_mu_sum = 0.0L;

    void add(const GazeSample& s) {
        ++samples;
        regions += s.regions.size();
        long double local = 0.0L;
        std::size_t local_n = 0;
        for (const auto& r : s.regions) {
            if (r.status != ValidationStatus::Hallucinated) {
                local += r.mu_attn;
                ++local_n;
            }
        }
        attended += local_n;
        mu_sum += local;
        if (local_n > 0) {
            ++samples_with_attended;
            per_sample_mu_sum += local / static_cast<long double>(local_n);
        }
    }

    SubsetStats finish(std::string name) const {
        SubsetStats s;
        s.subset = std::move(name);
        s.sample_count = samples;
        s.region_count = regions;
        s.attended_region_count = attended;
        s.avg_regions_per_sample = static_cast<double>(static_cast<long double>(regions) / samples);
        s.mean_attn_intensity = attended ? static_cast<double>(mu_sum / attended) : 0.0;
        s.mean_attn_intensity_per_sample =
            samples_with_attended ? static_cast<double>(per_sample_mu_sum / samples_with_attended) : 0.0;
        return s;
    }
};

json to_json(const SubsetStats& s) {
    return json{{"subset", s.subset},
                {"sample_count", s.sample_count},
                {"region_count", s.region_count},
                {"attended_region_count", s.attended_region_count},
                {"avg_regions_per_sample", s.avg_regions_per_sample},
                {"mean_attn_intensity", s.mean_attn_intensity},
                {"mean_attn_intensity_per_sample", s.mean_attn_intensity_per_sample}};
}

} // namespace

DatasetStats compute_stats(std::span<const GazeSample> samples) {
    if (samples.empty()) {
        throw InvalidArgument("statistics need at least one sample");
    }
    std::map<std::string, Tally> by_subset;
    Tally overall;
    for (const auto& s : samples) {
        by_subset[s.manifest.subset].add(s);
        overall.add(s);
    }
    DatasetStats out;
    for (const auto& [name, tally] : by_subset) {
        out.subsets.push_back(tally.finish(name));
    }
    out.overall = overall.finish("Overall");
    return out;
}

json to_json(const DatasetStats& stats) {
    json subsets = json::array();
    for (const auto& s : stats.subsets) {
        subsets.push_back(to_json(s));
    }
    return json{{"subsets", std::move(subsets)}, {"overall", to_json(stats.overall)}};
}

std::string format_stats_table(const DatasetStats& stats) {
    std::vector<SubsetStats> rows = stats.subsets;
    rows.push_back(stats.overall);

    std::size_t name_w = std::string("Dataset").size();
    for (const auto& r : rows) {
        name_w = std::max(name_w, r.subset.size());
    }
    std::ostringstream os;
    const auto rule = [&] { os << std::string(name_w + 3 + 13 + 3 + 23 + 3 + 19, '-') << '\n'; };
    os << std::left << std::setw(static_cast<int>(name_w)) << "Dataset" << " | " << std::right << std::setw(13)
       << "Total Samples" << " | " << std::setw(23) << "Avg. Regions per Sample" << " | " << std::setw(19)
       << "Mean Attn Intensity" << '\n';
    rule();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i + 1 == rows.size()) {
            rule();
        }
        const auto& r = rows[i];
        os << std::left << std::setw(static_cast<int>(name_w)) << r.subset << " | " << std::right << std::setw(13)
           << r.sample_count << " | " << std::setw(23) << std::fixed << std::setprecision(2)
           << r.avg_regions_per_sample << " | " << std::setw(19) << std::setprecision(4) << r.mean_attn_intensity
           << '\n';
    }
    return os.str();
}

} // namespace gazedecouple
