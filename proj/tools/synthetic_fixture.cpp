#include "synthetic_fixture.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gazedecouple/backends.hpp"
#include "gazedecouple/codec.hpp"
#include "gazedecouple/prompt.hpp"

namespace gazedecouple::fixture {

namespace fs = std::filesystem;

namespace {

constexpr int kWidth = 64;
constexpr int kHeight = 48;
constexpr int kHeatMargin = 3;

const char* const kSubsets[] = {"BDDA", "DADA", "DR(eye)VE", "LBW"};
const char* const kColors[] = {"red", "blue", "green", "yellow", "white", "orange"};
const char* const kKinds[] = {"hatchback car", "pedestrian", "cyclist", "truck", "traffic light", "bus"};

struct Rect {
    int x0, y0, x1, y1; // [x0,x1) x [y0,y1)

    bool overlaps(const Rect& o, int margin) const {
        return x0 - margin < o.x1 && o.x0 - margin < x1 && y0 - margin < o.y1 && o.y0 - margin < y1;
    }
    Rect shifted(int dx, int dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }
};

struct Object {
    Rect rect;
    double heat_peak = 0.0; // 0: unattended
    std::string description;
    cv::Vec3b color;
};

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    int between(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

  private:
    std::mt19937_64 engine_;
};

BinaryMask rect_mask(const Rect& r, Size size, int scale = 1) {
    const Size s{size.width * scale, size.height * scale};
    std::vector<std::uint8_t> bits(s.area(), 0);
    for (int y = std::max(0, r.y0 * scale); y < std::min(s.height, r.y1 * scale); ++y) {
        for (int x = std::max(0, r.x0 * scale); x < std::min(s.width, r.x1 * scale); ++x) {
            bits[static_cast<std::size_t>(y) * s.width + x] = 1;
        }
    }
    return BinaryMask(s, std::move(bits));
}

json mask_entry(const BinaryMask& mask, double score, bool as_rle) {
    json e{{"score", score}};
    if (as_rle) {
        const RleMask rle = encode_rle(mask);
        e["rle"] = {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
    } else {
        e["png_b64"] = base64_encode(encode_mask_png(mask));
    }
    return e;
}

Bytes encode(const cv::Mat& img) {
    std::vector<uchar> out;
    cv::imencode(".png", img, out, {cv::IMWRITE_PNG_COMPRESSION, 6});
    return Bytes(out.begin(), out.end());
}

bool place(Rng& rng, std::vector<Object>& objects, Object obj, int w, int h, bool at_left_edge = false) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const int x0 = at_left_edge ? 0 : rng.between(1, kWidth - w - 1);
        const int y0 = rng.between(1, kHeight - h - 1);
        const Rect r{x0, y0, x0 + w, y0 + h};
        const bool clash = std::any_of(objects.begin(), objects.end(), [&](const Object& o) {
            return r.overlaps(o.rect, 2 * kHeatMargin + 1);
        });
        if (!clash) {
            obj.rect = r;
            objects.push_back(std::move(obj));
            return true;
        }
    }
    return false;
}

} // namespace

void make_synthetic_fixture(const std::string& dir, int n_samples, std::uint64_t seed) {
    const fs::path root(dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "heatmaps");
    fs::create_directories(root / "mock" / "propose");
    fs::create_directories(root / "mock" / "segment");
    write_file_atomic((root / "mock" / "fixture.json").string(), json{{"permissive", false}}.dump(2) + "\n");

    const Size size{kWidth, kHeight};
    std::string manifest;

    for (int i = 0; i < n_samples; ++i) {
        Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(i));
        const int scenario = i % 5;
        char id_buf[16];
        std::snprintf(id_buf, sizeof id_buf, "s%02d", i);
        const std::string id = id_buf;

        const auto make_object = [&](double peak) {
            Object o;
            o.heat_peak = peak;
            const int c = rng.between(0, 5);
            const int k = rng.between(0, 5);
            o.description = std::string(kColors[c]) + " " + kKinds[k];
            o.color = cv::Vec3b(static_cast<uchar>(40 * c + 20), static_cast<uchar>(200 - 30 * k),
                                static_cast<uchar>(60 + 25 * (c + k)));
            return o;
        };

        std::vector<Object> objects;
        switch (scenario) {
        case 0: // two attended objects, duplicate box on the first
        case 3: // attended object + attended object the segmenter cannot find
            place(rng, objects, make_object(0.9), rng.between(10, 16), rng.between(8, 12));
            place(rng, objects, make_object(0.8), rng.between(10, 14), rng.between(8, 12));
            break;
        case 1: // attended object + hallucinated proposal on an unattended one
            place(rng, objects, make_object(0.95), rng.between(10, 16), rng.between(8, 12));
            place(rng, objects, make_object(0.0), rng.between(8, 12), rng.between(8, 10));
            break;
        case 2: // weakly attended object, low-confidence segmentation
            place(rng, objects, make_object(0.15), rng.between(12, 16), rng.between(10, 12));
            break;
        case 4: // object at the left edge, box runs out of the image
            place(rng, objects, make_object(0.9), rng.between(10, 14), rng.between(10, 12), true);
            break;
        }
        for (auto& o : objects) {
            o.description += " at (" + std::to_string((o.rect.x0 + o.rect.x1) / 2) + ", " +
                             std::to_string((o.rect.y0 + o.rect.y1) / 2) + ")";
        }

        // frame
        cv::Mat rgb(kHeight, kWidth, CV_8UC3, cv::Scalar(90, 95, 100));
        for (int y = kHeight / 2; y < kHeight; ++y) {
            for (int x = 0; x < kWidth; ++x) {
                rgb.at<cv::Vec3b>(y, x) = cv::Vec3b(70, 70, 70); // road
            }
        }
        for (const auto& o : objects) {
            for (int y = o.rect.y0; y < o.rect.y1; ++y) {
                for (int x = o.rect.x0; x < o.rect.x1; ++x) {
                    rgb.at<cv::Vec3b>(y, x) = o.color;
                }
            }
        }

        // heatmap: truncated gaussian per attended object
        std::vector<double> heat(size.area(), 0.0);
        for (const auto& o : objects) {
            if (o.heat_peak <= 0.0) {
                continue;
            }
            const double cx = (o.rect.x0 + o.rect.x1 - 1) / 2.0;
            const double cy = (o.rect.y0 + o.rect.y1 - 1) / 2.0;
            const double sx = (o.rect.x1 - o.rect.x0) / 2.0;
            const double sy = (o.rect.y1 - o.rect.y0) / 2.0;
            for (int y = std::max(0, o.rect.y0 - kHeatMargin); y < std::min(kHeight, o.rect.y1 + kHeatMargin); ++y) {
                for (int x = std::max(0, o.rect.x0 - kHeatMargin); x < std::min(kWidth, o.rect.x1 + kHeatMargin);
                     ++x) {
                    const double dx = (x - cx) / sx;
                    const double dy = (y - cy) / sy;
                    double& h = heat[static_cast<std::size_t>(y) * kWidth + x];
                    h = std::min(1.0, h + o.heat_peak * std::exp(-0.5 * (dx * dx + dy * dy)));
                }
            }
        }
        cv::Mat heat_img(kHeight, kWidth, CV_8U);
        for (int y = 0; y < kHeight; ++y) {
            for (int x = 0; x < kWidth; ++x) {
                heat_img.at<uchar>(y, x) =
                    static_cast<uchar>(std::lround(heat[static_cast<std::size_t>(y) * kWidth + x] * 255.0));
            }
        }

        const Bytes rgb_png = encode(rgb);
        const Bytes heat_png = encode(heat_img);
        write_file_atomic((root / "images" / (id + ".png")).string(), rgb_png);
        write_file_atomic((root / "heatmaps" / (id + ".png")).string(), heat_png);

        // proposal response
        json regions = json::array();
        for (std::size_t k = 0; k < objects.size(); ++k) {
            const auto& o = objects[k];
            Rect box = o.rect.shifted(0, 0);
            if (scenario == 4) {
                box.x0 -= 5; // spills past the left border, clamped on ingestion
            }
            regions.push_back({{"bbox", {box.x0, box.y0, box.x1, box.y1}},
                               {"description", o.description},
                               {"cause", k == 0 ? "closest to the ego lane" : "may enter the driving path"}});
            if (scenario == 0 && k == 0) {
                const Rect dup = o.rect.shifted(1, 0);
                regions.push_back({{"bbox", {dup.x0, dup.y0, dup.x1, dup.y1}},
                                   {"description", "same " + o.description.substr(0, o.description.find(" at "))},
                                   {"cause", "closest to the ego lane"}});
            }
        }
        const json propose_response{{"regions", regions}};
        const ProposalRequest preq{rgb_png, heat_png, std::string(kCotPrompt)};
        write_file_atomic((root / "mock" / "propose" / (request_key(to_wire(preq)) + ".json")).string(),
                          propose_response.dump(2) + "\n");

        // segmentation responses for the proposals the pipeline will actually send
        const auto proposals = parse_proposals(propose_response, size, kDefaultIouThreshold);
        for (const auto& p : proposals) {
            const Object* obj = &objects.front();
            double best = -1.0;
            for (const auto& o : objects) {
                const double v = iou(p.bbox, BBox{o.rect.x0, o.rect.y0, o.rect.x1, o.rect.y1});
                if (v > best) {
                    best = v;
                    obj = &o;
                }
            }
            const bool second = obj != &objects.front();
            json masks = json::array();
            const BinaryMask exact = rect_mask(obj->rect, size);
            switch (scenario) {
            case 0:
                masks.push_back(mask_entry(exact, 0.92, false));
                masks.push_back(mask_entry(rect_mask(obj->rect.shifted(0, 2), size), 0.61, true));
                break;
            case 1:
                masks.push_back(mask_entry(exact, second ? 0.88 : 0.93, second));
                break;
            case 2: {
                const Rect grown{obj->rect.x0 - 2, obj->rect.y0 - 2, obj->rect.x1 + 2, obj->rect.y1 + 2};
                masks.push_back(mask_entry(rect_mask(grown, size), 0.2, true));
                masks.push_back(mask_entry(exact, 0.3, false));
                masks.push_back(mask_entry(rect_mask(obj->rect.shifted(3, 0), size), 0.1, true));
                masks.push_back(mask_entry(rect_mask(obj->rect.shifted(-3, 1), size), 0.04, false));
                break;
            }
            case 3:
                if (!second) {
                    masks.push_back(mask_entry(rect_mask(obj->rect, size, 2), 0.9, true));
                }
                break;
            case 4: {
                const Rect left{obj->rect.x0, obj->rect.y0, (obj->rect.x0 + obj->rect.x1) / 2, obj->rect.y1};
                const Rect far{kWidth - 8, 1, kWidth - 1, 6};
                masks.push_back(mask_entry(exact, 0.91, false));
                masks.push_back(mask_entry(rect_mask(left, size), 0.72, true));
                masks.push_back(mask_entry(rect_mask(far, size), 0.55, true));
                break;
            }
            }
            const SegmentationRequest sreq{rgb_png, p.description, std::nullopt};
            write_file_atomic((root / "mock" / "segment" / (request_key(to_wire(sreq)) + ".json")).string(),
                              json{{"masks", masks}}.dump(2) + "\n");
        }

        manifest += json{{"sample_id", id},
                         {"subset", kSubsets[i % 4]},
                         {"image_path", "images/" + id + ".png"},
                         {"heatmap_path", "heatmaps/" + id + ".png"}}
                        .dump() +
                    "\n";
    }
    write_file_atomic((root / "manifest.jsonl").string(), manifest);
}

} // namespace gazedecouple::fixture
