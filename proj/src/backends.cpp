#include "gazedecouple/backends.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "gazedecouple/codec.hpp"
#include "gazedecouple/error.hpp"

namespace gazedecouple {

namespace fs = std::filesystem;

void FallbackConfig::validate() const {
    if (!(tau_low > 0.0 && tau_low < tau_high && tau_high <= 1.0)) {
        throw ConfigError("thresholds must satisfy 0 < tau_low < tau_high <= 1");
    }
    if (n_fallback < 1) {
        throw ConfigError("n_fallback must be a positive integer");
    }
}

json to_wire(const ProposalRequest& request) {
    if (request.prompt.empty()) {
        throw InvalidArgument("proposal prompt must not be empty");
    }
    return json{{"rgb_b64", base64_encode(request.rgb_image)},
                {"gray_b64", base64_encode(request.gray_heatmap)},
                {"prompt", request.prompt}};
}

json to_wire(const SegmentationRequest& request) {
    if (request.text_prompt.empty()) {
        throw InvalidArgument("segmentation text must not be empty");
    }
    json body{{"rgb_b64", base64_encode(request.rgb_image)}, {"text", request.text_prompt}};
    if (request.bbox) {
        const BBox& b = *request.bbox;
        body["bbox"] = {b.x_min, b.y_min, b.x_max, b.y_max};
    }
    return body;
}

std::string request_key(const json& body) { return sha256_hex(body.dump()); }

// ---- HTTP ----

HttpBackend::HttpBackend(std::string base_url, RetryPolicy retry, int max_in_flight,
                         std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout), max_in_flight_(std::max(1, max_in_flight)) {
    while (!base_url_.empty() && base_url_.back() == '/') {
        base_url_.pop_back();
    }
    if (retry_.attempts < 1) {
        throw ConfigError("retry attempts must be >= 1");
    }
}

json HttpBackend::post(std::string_view route, const json& body) {
    const std::string payload = body.dump();
    std::string correlation_id;
    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [this] { return in_flight_ < max_in_flight_; });
        ++in_flight_;
        correlation_id = std::to_string(++next_id_);
    }
    struct Release {
        HttpBackend& self;
        ~Release() {
            {
                std::lock_guard lock(self.mutex_);
                --self.in_flight_;
            }
            self.slot_free_.notify_one();
        }
    } release{*this};

    std::string last_error;
    for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(retry_.base_delay * (1LL << (attempt - 1)));
        }
        try {
            return post_once(route, payload, correlation_id);
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw TransportError(base_url_ + std::string(route) + ": giving up after " + std::to_string(retry_.attempts) +
                         " attempts: " + last_error);
}

json HttpBackend::post_once(std::string_view route, const std::string& payload, const std::string& correlation_id) {
    httplib::Client client(base_url_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const httplib::Headers headers{{"X-Correlation-Id", correlation_id}};
    auto res = client.Post(std::string(route), headers, payload, "application/json");
    if (!res) {
        throw TransportError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw TransportError("server error " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw MalformedResponse("unexpected HTTP status " + std::to_string(res->status));
    }
    if (res->has_header("X-Correlation-Id") && res->get_header_value("X-Correlation-Id") != correlation_id) {
        throw MalformedResponse("correlation id mismatch");
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
}

// ---- mock ----

namespace {

bool read_permissive(const std::string& dir) {
    const fs::path cfg = fs::path(dir) / "fixture.json";
    if (!fs::exists(cfg)) {
        return false;
    }
    std::ifstream in(cfg);
    try {
        const json j = json::parse(in);
        return j.value("permissive", false);
    } catch (const json::exception& e) {
        throw MalformedResponse(cfg.string() + ": " + e.what());
    }
}

} // namespace

MockBackend::MockBackend(std::string fixture_dir) : dir_(std::move(fixture_dir)) {
    if (!fs::is_directory(dir_)) {
        throw MissingFixture("fixture directory not found: " + dir_);
    }
    permissive_ = read_permissive(dir_);
}

MockBackend::MockBackend(std::string fixture_dir, bool permissive)
    : dir_(std::move(fixture_dir)), permissive_(permissive) {}

json MockBackend::post(std::string_view route, const json& body) {
    std::string sub;
    json fallback;
    if (route == kProposeRoute) {
        sub = "propose";
        fallback = json{{"regions", json::array()}};
    } else if (route == kSegmentRoute) {
        sub = "segment";
        fallback = json{{"masks", json::array()}};
    } else {
        throw MalformedResponse("unknown route " + std::string(route));
    }
    const std::string key = request_key(body);
    const fs::path file = fs::path(dir_) / sub / (key + ".json");
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        if (permissive_) {
            return fallback;
        }
        throw MissingFixture("no fixture for " + std::string(route) + " key " + key);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw MalformedResponse(file.string() + ": " + e.what());
    }
}

BackendPair mock_backends(const std::string& fixture_dir) {
    auto mock = std::make_shared<MockBackend>(fixture_dir);
    return {mock, mock};
}

BackendPair http_backends(const std::string& propose_url, const std::string& segment_url, RetryPolicy retry,
                          int max_in_flight) {
    return {std::make_shared<HttpBackend>(propose_url, retry, max_in_flight),
            std::make_shared<HttpBackend>(segment_url, retry, max_in_flight)};
}

// ---- proposals ----

namespace {

int coordinate(const json& v) {
    if (!v.is_number()) {
        throw MalformedResponse("bbox coordinates must be numbers");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d) || std::abs(d) > 1e9) {
        throw MalformedResponse("bbox coordinate out of range");
    }
    return static_cast<int>(std::lround(d));
}

} // namespace

std::vector<RegionProposal> parse_proposals(const json& response, Size image, double iou_threshold) {
    if (!response.is_object() || !response.contains("regions") || !response["regions"].is_array()) {
        throw MalformedResponse("proposal response must be an object with a 'regions' array");
    }
    std::vector<RegionProposal> out;
    for (const auto& r : response["regions"]) {
        if (!r.is_object()) {
            throw MalformedResponse("region entries must be objects");
        }
        const auto bbox = r.find("bbox");
        if (bbox == r.end() || !bbox->is_array() || bbox->size() != 4) {
            throw MalformedResponse("region bbox must be [x0, y0, x1, y1]");
        }
        const auto desc = r.find("description");
        if (desc == r.end() || !desc->is_string() || desc->get<std::string>().empty()) {
            throw MalformedResponse("region description must be a non-empty string");
        }
        std::string cause;
        if (const auto c = r.find("cause"); c != r.end()) {
            if (!c->is_string()) {
                throw MalformedResponse("region cause must be a string");
            }
            cause = c->get<std::string>();
        }
        BBox box{coordinate((*bbox)[0]), coordinate((*bbox)[1]), coordinate((*bbox)[2]), coordinate((*bbox)[3])};
        box = clamp_bbox(box, image);
        if (!box.valid()) {
            continue;
        }
        out.push_back({box, desc->get<std::string>(), std::move(cause)});
    }
    return merge_overlapping_boxes(out, iou_threshold);
}

std::vector<RegionProposal> propose_regions(const ProposalRequest& request, Backend& backend, double iou_threshold) {
    const Size image = probe_image_size(request.rgb_image);
    probe_image_size(request.gray_heatmap);
    const json response = backend.post(kProposeRoute, to_wire(request));
    return parse_proposals(response, image, iou_threshold);
}

// ---- masks ----

BinaryMask decode_rle(const RleMask& rle) {
    if (rle.height <= 0 || rle.width <= 0) {
        throw MalformedResponse("RLE size must be positive");
    }
    const Size size{rle.width, rle.height};
    std::vector<std::uint8_t> bits;
    bits.reserve(size.area());
    std::uint8_t value = 0;
    for (long long c : rle.counts) {
        if (c < 0 || bits.size() + static_cast<std::size_t>(c) > size.area()) {
            throw MalformedResponse("RLE counts overflow the mask");
        }
        bits.insert(bits.end(), static_cast<std::size_t>(c), value);
        value ^= 1;
    }
    if (bits.size() != size.area()) {
        throw MalformedResponse("RLE counts cover " + std::to_string(bits.size()) + " of " +
                                std::to_string(size.area()) + " pixels");
    }
    return BinaryMask(size, std::move(bits));
}

RleMask encode_rle(const BinaryMask& mask) {
    RleMask rle{mask.height(), mask.width(), {}};
    std::uint8_t value = 0;
    long long run = 0;
    for (std::uint8_t b : mask.bits()) {
        if (b != value) {
            rle.counts.push_back(run);
            run = 0;
            value = b;
        }
        ++run;
    }
    rle.counts.push_back(run);
    return rle;
}

std::vector<CandidateMask> parse_masks(const json& response, std::optional<Size> target) {
    if (!response.is_object() || !response.contains("masks") || !response["masks"].is_array()) {
        throw MalformedResponse("segmentation response must be an object with a 'masks' array");
    }
    std::vector<CandidateMask> out;
    for (const auto& m : response["masks"]) {
        if (!m.is_object()) {
            throw MalformedResponse("mask entries must be objects");
        }
        const auto score = m.find("score");
        if (score == m.end() || !score->is_number()) {
            throw MalformedResponse("mask score must be a number");
        }
        const double conf = score->get<double>();
        if (!(conf >= 0.0 && conf <= 1.0)) {
            throw MalformedResponse("mask score outside [0,1]");
        }
        std::optional<BinaryMask> mask;
        if (const auto png = m.find("png_b64"); png != m.end()) {
            if (!png->is_string()) {
                throw MalformedResponse("png_b64 must be a string");
            }
            try {
                mask = decode_mask_image(base64_decode(png->get<std::string>()));
            } catch (const DecodeError& e) {
                throw MalformedResponse(std::string("bad mask PNG: ") + e.what());
            }
        } else if (const auto rle = m.find("rle"); rle != m.end()) {
            try {
                const auto& sz = rle->at("size");
                RleMask r{sz.at(0).get<int>(), sz.at(1).get<int>(), rle->at("counts").get<std::vector<long long>>()};
                mask = decode_rle(r);
            } catch (const json::exception& e) {
                throw MalformedResponse(std::string("bad RLE mask: ") + e.what());
            }
        } else {
            throw MalformedResponse("mask needs png_b64 or rle");
        }
        if (target && mask->size() != *target) {
            mask = resize_nearest(*mask, *target);
        }
        out.push_back({std::move(*mask), conf});
    }
    return out;
}

std::vector<CandidateMask> cascade_filter(std::vector<CandidateMask> masks, const FallbackConfig& cfg) {
    std::stable_sort(masks.begin(), masks.end(),
                     [](const CandidateMask& a, const CandidateMask& b) { return a.confidence > b.confidence; });
    std::vector<CandidateMask> out;
    for (auto& m : masks) {
        if (m.confidence >= cfg.tau_high) {
            out.push_back(std::move(m));
        }
    }
    if (!out.empty()) {
        return out;
    }
    for (auto& m : masks) {
        if (out.size() >= static_cast<std::size_t>(cfg.n_fallback)) {
            break;
        }
        if (m.confidence >= cfg.tau_low) {
            out.push_back(std::move(m));
        }
    }
    return out;
}

std::vector<CandidateMask> segment_cascaded(const SegmentationRequest& request, const FallbackConfig& cfg,
                                            Backend& backend, std::optional<Size> target) {
    const json response = backend.post(kSegmentRoute, to_wire(request));
    return cascade_filter(parse_masks(response, target), cfg);
}

} // namespace gazedecouple
