#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <functional>
#include <map>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gazedecouple/backends.hpp"
#include "gazedecouple/codec.hpp"
#include "gazedecouple/pipeline.hpp"
#include "gazedecouple/raster.hpp"

namespace gazedecouple::testing {

inline Raster random_raster(std::mt19937_64& rng, Size size, double zero_fraction = 0.0) {
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::bernoulli_distribution zero(zero_fraction);
    std::vector<double> v(size.area());
    for (auto& x : v) {
        x = zero(rng) ? 0.0 : value(rng);
    }
    return Raster(size, std::move(v));
}

inline BinaryMask random_mask(std::mt19937_64& rng, Size size, double density = 0.3) {
    std::bernoulli_distribution on(density);
    std::vector<std::uint8_t> bits(size.area());
    for (auto& b : bits) {
        b = on(rng) ? 1 : 0;
    }
    return BinaryMask(size, std::move(bits));
}

inline BinaryMask box_mask(Size size, BBox box) {
    std::vector<std::uint8_t> bits(size.area(), 0);
    for (int y = box.y_min; y < box.y_max; ++y) {
        for (int x = box.x_min; x < box.x_max; ++x) {
            bits[static_cast<std::size_t>(y) * size.width + x] = 1;
        }
    }
    return BinaryMask(size, std::move(bits));
}

// 8-bit grayscale PNG of the given pixel values, row-major.
inline Bytes gray_png(Size size, const std::vector<std::uint8_t>& pixels) {
    cv::Mat m(size.height, size.width, CV_8UC1);
    std::copy(pixels.begin(), pixels.end(), m.data);
    std::vector<std::uint8_t> out;
    cv::imencode(".png", m, out);
    return out;
}

inline Bytes color_png(Size size, cv::Scalar bgr) {
    const cv::Mat m(size.height, size.width, CV_8UC3, bgr);
    std::vector<std::uint8_t> out;
    cv::imencode(".png", m, out);
    return out;
}

// Backend answering from in-memory tables: /propose always returns `regions`,
// /segment looks the request text up in `masks_by_text` (missing text: no masks).
class FakeBackend final : public Backend {
  public:
    json regions = json::array();
    std::map<std::string, json> masks_by_text;
    std::function<void(const json&)> on_propose;

    json post(std::string_view route, const json& body) override {
        if (route == kProposeRoute) {
            if (on_propose) on_propose(body);
            return json{{"regions", regions}};
        }
        const auto it = masks_by_text.find(body.at("text").get<std::string>());
        return json{{"masks", it == masks_by_text.end() ? json::array() : it->second}};
    }
};

inline json png_mask_entry(const BinaryMask& mask, double score) {
    return json{{"png_b64", base64_encode(encode_mask_png(mask))}, {"score", score}};
}

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("gazedecouple-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

  private:
    std::filesystem::path path_;
};

// Two samples with single-pixel objects on 8-bit heat values 51, 102 (sample "a", K = 2)
// and 153 (sample "b", K = 1): mu = 0.2, 0.4 and 0.6. Writes the inputs and the records
// under dir and returns the processed samples.
inline std::vector<GazeSample> write_stats_fixture(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "in");
    const Size size{4, 1};
    struct Planned {
        std::string id;
        std::vector<std::uint8_t> heat;
        std::vector<int> pixels;
    };
    const std::vector<Planned> plans{{"a", {51, 102, 0, 0}, {0, 1}}, {"b", {0, 0, 153, 0}, {2}}};
    std::vector<GazeSample> out;
    for (const auto& plan : plans) {
        const auto image = dir / "in" / (plan.id + "_rgb.png");
        const auto heat = dir / "in" / (plan.id + "_heat.png");
        write_file_atomic(image.string(), color_png(size, cv::Scalar(20, 40, 60)));
        write_file_atomic(heat.string(), gray_png(size, plan.heat));
        auto proposer = std::make_shared<FakeBackend>();
        auto segmenter = std::make_shared<FakeBackend>();
        for (int px : plan.pixels) {
            const std::string text = "object " + std::to_string(px);
            proposer->regions.push_back({{"bbox", {px, 0, px + 1, 1}}, {"description", text}});
            segmenter->masks_by_text[text] = json::array({png_mask_entry(box_mask(size, {px, 0, px + 1, 1}), 0.9)});
        }
        const SampleManifest m{plan.id, "Hand", image.string(), heat.string()};
        PipelineConfig cfg;
        GazeSample s = process_sample(m, cfg, {proposer, segmenter});
        write_record(s, (dir / "out").string(), config_digest(cfg));
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace gazedecouple::testing
