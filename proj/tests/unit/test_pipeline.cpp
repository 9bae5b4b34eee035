#include <gtest/gtest.h>

#include <fstream>

#include "gazedecouple/codec.hpp"
#include "gazedecouple/error.hpp"
#include "gazedecouple/pipeline.hpp"
#include "support.hpp"
#include "synthetic_fixture.hpp"

using namespace gazedecouple;
using gazedecouple::testing::box_mask;
using gazedecouple::testing::color_png;
using gazedecouple::testing::FakeBackend;
using gazedecouple::testing::gray_png;
using gazedecouple::testing::png_mask_entry;
using gazedecouple::testing::TempDir;

namespace fs = std::filesystem;

namespace {

const std::string kFixture = GAZEDECOUPLE_FIXTURE_DIR;

std::vector<SampleManifest> bundled_manifest() { return load_manifest(kFixture + "/manifest.jsonl"); }

BackendPair bundled_backends() { return mock_backends(kFixture + "/mock"); }

std::vector<std::string> statuses(const GazeSample& s) {
    std::vector<std::string> out;
    for (const auto& r : s.regions) out.emplace_back(to_string(r.status));
    return out;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            const Bytes b = read_file_bytes(e.path().string());
            out[fs::relative(e.path(), root).generic_string()] = std::string(b.begin(), b.end());
        }
    }
    return out;
}

} // namespace

TEST(BundledFixture, EverySampleSatisfiesRecordInvariants) {
    TempDir out;
    const auto manifest = bundled_manifest();
    ASSERT_EQ(manifest.size(), 10u);
    const PipelineResult r = run_pipeline(manifest, PipelineConfig{}, bundled_backends(), out.str());
    ASSERT_TRUE(r.failures.empty());
    ASSERT_EQ(r.samples.size(), 10u);
    for (const auto& s : r.samples) {
        ASSERT_EQ(s.regions.size(), s.region_maps.size());
        for (std::size_t k = 0; k < s.regions.size(); ++k) {
            const auto& region = s.regions[k];
            EXPECT_EQ(s.region_maps[k], hadamard_decouple(s.global_map, region.final_mask));
            EXPECT_NEAR(region.mu_attn, mean_attention_intensity(region.final_mask, s.global_map), 1e-15);
            if (region.status == ValidationStatus::Hallucinated) {
                EXPECT_FALSE(region.final_mask.any());
            } else {
                EXPECT_GT(region.mu_attn, 0.0);
            }
            EXPECT_TRUE(region.proposal.bbox.valid());
            EXPECT_LE(region.proposal.bbox.x_max, s.global_map.width());
        }
        const GazeSample back = load_record((out / "records" / (s.manifest.sample_id + ".json")).string());
        EXPECT_EQ(back.regions.size(), s.regions.size());
    }
}

TEST(BundledFixture, CoversEveryValidationOutcome) {
    TempDir out;
    const PipelineResult r = run_pipeline(bundled_manifest(), PipelineConfig{}, bundled_backends(), out.str());
    ASSERT_EQ(r.samples.size(), 10u);
    EXPECT_EQ(statuses(r.samples[0]), (std::vector<std::string>{"validated", "validated"}));
    EXPECT_EQ(statuses(r.samples[1]), (std::vector<std::string>{"validated", "hallucinated"}));
    EXPECT_EQ(statuses(r.samples[2]), (std::vector<std::string>{"relaxed_best"}));
    EXPECT_EQ(statuses(r.samples[3]), (std::vector<std::string>{"validated", "hallucinated"}));
    EXPECT_EQ(statuses(r.samples[4]), (std::vector<std::string>{"validated"}));
    // fallback pass keeps the three best of four low-confidence masks
    EXPECT_EQ(r.samples[2].regions[0].candidate_mu.size(), 3u);
    // empty segmentation propagates to a hallucinated region with no candidates
    EXPECT_TRUE(r.samples[3].regions[1].candidate_mu.empty());
    // out-of-bounds box is clamped to the left edge
    EXPECT_EQ(r.samples[4].regions[0].proposal.bbox.x_min, 0);
    // duplicate proposals are merged
    EXPECT_NE(r.samples[0].regions[0].proposal.description.find("; "), std::string::npos);
}

TEST(BundledFixture, SubsetProducesRecordsAndRegionMaps) {
    TempDir out;
    const auto all = bundled_manifest();
    const std::vector<SampleManifest> two{all[0], all[2]};
    const PipelineResult r = run_pipeline(two, PipelineConfig{}, bundled_backends(), out.str());
    ASSERT_TRUE(r.failures.empty());
    std::size_t records = 0;
    std::size_t maps = 0;
    for (const auto& e : fs::directory_iterator(out / "records")) records += e.is_regular_file();
    for (const auto& e : fs::directory_iterator(out / "region_maps")) maps += e.is_regular_file();
    EXPECT_EQ(records, 2u);
    EXPECT_EQ(maps, 3u);
}

TEST(BundledFixture, OutputIsIndependentOfWorkerCount) {
    TempDir a;
    TempDir b;
    PipelineConfig one;
    PipelineConfig four;
    four.workers = 4;
    run_pipeline(bundled_manifest(), one, bundled_backends(), a.str());
    run_pipeline(bundled_manifest(), four, bundled_backends(), b.str());
    EXPECT_EQ(tree_bytes(a.path()), tree_bytes(b.path()));
}

TEST(BundledFixture, IsUpToDateWithGenerator) {
    TempDir fresh;
    fixture::make_synthetic_fixture(fresh.str(), 10, 7);
    EXPECT_EQ(tree_bytes(fresh.path()), tree_bytes(kFixture));
}

TEST(Pipeline, UnattendedObjectIsHallucinatedDespiteConfidentMask) {
    TempDir dir;
    const Size size{8, 8};
    std::vector<std::uint8_t> heat(size.area(), 0);
    heat[0] = 200; // attention only at the top-left pixel
    write_file_atomic((dir / "rgb.png").string(), color_png(size, cv::Scalar(1, 2, 3)));
    write_file_atomic((dir / "heat.png").string(), gray_png(size, heat));
    auto proposer = std::make_shared<FakeBackend>();
    auto segmenter = std::make_shared<FakeBackend>();
    proposer->regions = json::array({{{"bbox", {4, 4, 8, 8}}, {"description", "parked van"}}});
    segmenter->masks_by_text["parked van"] = json::array({png_mask_entry(box_mask(size, {4, 4, 8, 8}), 0.95)});
    const GazeSample s = process_sample({"x", "T", (dir / "rgb.png").string(), (dir / "heat.png").string()},
                                        PipelineConfig{}, {proposer, segmenter});
    ASSERT_EQ(s.regions.size(), 1u);
    EXPECT_EQ(s.regions[0].status, ValidationStatus::Hallucinated);
    EXPECT_EQ(s.regions[0].mu_attn, 0.0);
    EXPECT_FALSE(s.regions[0].final_mask.any());
    for (double v : s.region_maps[0].values()) EXPECT_EQ(v, 0.0);
}

TEST(Pipeline, SampleWithoutProposalsRoundTrips) {
    TempDir dir;
    const Size size{4, 4};
    write_file_atomic((dir / "rgb.png").string(), color_png(size, cv::Scalar(1, 2, 3)));
    write_file_atomic((dir / "heat.png").string(), gray_png(size, std::vector<std::uint8_t>(16, 9)));
    auto empty = std::make_shared<FakeBackend>();
    const GazeSample s = process_sample({"none", "T", (dir / "rgb.png").string(), (dir / "heat.png").string()},
                                        PipelineConfig{}, {empty, empty});
    EXPECT_TRUE(s.regions.empty());
    write_record(s, (dir / "out").string(), "digest");
    const GazeSample back = load_record((dir / "out" / "records" / "none.json").string());
    EXPECT_TRUE(back.regions.empty());
    EXPECT_EQ(back.global_map, s.global_map);
}

TEST(Pipeline, BboxIsSentOnlyWhenEnabled) {
    TempDir dir;
    const Size size{4, 4};
    write_file_atomic((dir / "rgb.png").string(), color_png(size, cv::Scalar(1, 2, 3)));
    write_file_atomic((dir / "heat.png").string(), gray_png(size, std::vector<std::uint8_t>(16, 9)));
    struct Recorder final : Backend {
        std::vector<json> bodies;
        json post(std::string_view, const json& body) override {
            bodies.push_back(body);
            return json{{"masks", json::array()}};
        }
    };
    auto proposer = std::make_shared<FakeBackend>();
    proposer->regions = json::array({{{"bbox", {0, 0, 2, 2}}, {"description", "sign"}}});
    const SampleManifest m{"x", "T", (dir / "rgb.png").string(), (dir / "heat.png").string()};
    auto rec = std::make_shared<Recorder>();
    process_sample(m, PipelineConfig{}, {proposer, rec});
    PipelineConfig with_box;
    with_box.segment_with_bbox = true;
    process_sample(m, with_box, {proposer, rec});
    ASSERT_EQ(rec->bodies.size(), 2u);
    EXPECT_FALSE(rec->bodies[0].contains("bbox"));
    EXPECT_EQ(rec->bodies[1]["bbox"], json({0, 0, 2, 2}));
}

TEST(Pipeline, FailingSampleDoesNotAffectOthers) {
    TempDir out;
    auto manifest = bundled_manifest();
    manifest.resize(3);
    manifest[1].heatmap_path = (out / "missing.png").string();
    std::vector<std::string> reported;
    const PipelineResult r = run_pipeline(manifest, PipelineConfig{}, bundled_backends(), (out / "o").string(),
                                          [&](const SampleManifest& m, const std::string& err) {
                                              if (!err.empty()) reported.push_back(m.sample_id);
                                          });
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_EQ(r.failures[0].sample_id, manifest[1].sample_id);
    EXPECT_EQ(reported, (std::vector<std::string>{manifest[1].sample_id}));
    ASSERT_EQ(r.samples.size(), 2u);
    EXPECT_EQ(r.samples[0].manifest.sample_id, manifest[0].sample_id);
    EXPECT_EQ(r.samples[1].manifest.sample_id, manifest[2].sample_id);
}

TEST(Records, TamperedRegionMapIsRejected) {
    TempDir out;
    const auto all = bundled_manifest();
    const std::vector<SampleManifest> one{all[0]};
    run_pipeline(one, PipelineConfig{}, bundled_backends(), out.str());
    const std::string id = all[0].sample_id;
    const auto record = (out / "records" / (id + ".json")).string();
    EXPECT_NO_THROW(load_record(record));
    const auto map_path = out / "region_maps" / (id + "_0.png");
    const Size size = load_heatmap_file(map_path.string()).size();
    write_file_atomic(map_path.string(), encode_raster_png16(Raster::filled(size, 0.5)));
    EXPECT_THROW(load_record(record), RecordError);
}

TEST(Records, TamperedMuIsRejected) {
    TempDir out;
    const auto all = bundled_manifest();
    const std::vector<SampleManifest> one{all[0]};
    run_pipeline(one, PipelineConfig{}, bundled_backends(), out.str());
    const auto record = out / "records" / (all[0].sample_id + ".json");
    json j = json::parse(std::ifstream(record));
    j["regions"][0]["mu_attn"] = 0.99;
    std::ofstream(record) << j.dump();
    EXPECT_THROW(load_record(record.string()), RecordError);
    EXPECT_THROW(load_record((out / "records" / "absent.json").string()), RecordError);
}

TEST(Manifest, RejectsDuplicateAndUnsafeIds) {
    TempDir dir;
    const auto path = (dir / "m.jsonl").string();
    std::ofstream(path) << R"({"sample_id":"a","subset":"S","image_path":"i.png","heatmap_path":"h.png"})" << '\n'
                        << R"({"sample_id":"a","subset":"S","image_path":"i.png","heatmap_path":"h.png"})" << '\n';
    EXPECT_THROW(load_manifest(path), InvalidArgument);
    std::ofstream(path) << R"({"sample_id":"../x","subset":"S","image_path":"i.png","heatmap_path":"h.png"})" << '\n';
    EXPECT_THROW(load_manifest(path), InvalidArgument);
    std::ofstream(path) << "not json\n";
    EXPECT_THROW(load_manifest(path), InvalidArgument);
    std::ofstream(path) << R"({"sample_id":"ok","subset":"S","image_path":"i.png","heatmap_path":"/abs/h.png"})"
                        << "\n\n";
    const auto m = load_manifest(path);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(fs::path(m[0].image_path), fs::weakly_canonical(dir / "i.png"));
    EXPECT_EQ(m[0].heatmap_path, "/abs/h.png");
}

TEST(Stats, HandBuiltExample) {
    TempDir dir;
    const auto samples = gazedecouple::testing::write_stats_fixture(dir.path());
    const DatasetStats s = compute_stats(samples);
    EXPECT_EQ(s.overall.sample_count, 2u);
    EXPECT_EQ(s.overall.region_count, 3u);
    EXPECT_EQ(s.overall.avg_regions_per_sample, 1.5);
    EXPECT_EQ(s.overall.mean_attn_intensity, 0.4);
    EXPECT_DOUBLE_EQ(s.overall.mean_attn_intensity_per_sample, 0.45);
    EXPECT_THROW(compute_stats(std::span<const GazeSample>{}), InvalidArgument);
}

TEST(Stats, OverallIsRegionWeightedMeanOfSubsets) {
    TempDir out;
    const PipelineResult r = run_pipeline(bundled_manifest(), PipelineConfig{}, bundled_backends(), out.str());
    const DatasetStats s = compute_stats(r.samples);
    double weighted = 0;
    std::size_t attended = 0;
    std::size_t samples = 0;
    for (const auto& sub : s.subsets) {
        weighted += sub.mean_attn_intensity * static_cast<double>(sub.attended_region_count);
        attended += sub.attended_region_count;
        samples += sub.sample_count;
    }
    EXPECT_EQ(samples, s.overall.sample_count);
    EXPECT_EQ(attended, s.overall.attended_region_count);
    EXPECT_NEAR(weighted / static_cast<double>(attended), s.overall.mean_attn_intensity, 1e-12);
    EXPECT_TRUE(std::is_sorted(s.subsets.begin(), s.subsets.end(),
                               [](const auto& a, const auto& b) { return a.subset < b.subset; }));
    const std::string table = format_stats_table(s);
    EXPECT_NE(table.find("Overall"), std::string::npos);
    EXPECT_NE(table.find("Avg. Regions per Sample"), std::string::npos);
}
