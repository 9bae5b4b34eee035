#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gazedecouple/raster.hpp"

namespace gazedecouple {

using json = nlohmann::json;

inline constexpr std::string_view kProposeRoute = "/propose";
inline constexpr std::string_view kSegmentRoute = "/segment";

struct ProposalRequest {
    Bytes rgb_image;
    Bytes gray_heatmap;
    std::string prompt;
};

struct SegmentationRequest {
    Bytes rgb_image;
    std::string text_prompt;
    /// Sent only when set; the default protocol is text-only.
    std::optional<BBox> bbox;
};

struct FallbackConfig {
    double tau_high = 0.5;
    double tau_low = 0.05;
    int n_fallback = 3;

    void validate() const;
};

/// Wire bodies. Both are canonical: keys sorted, compact separators.
json to_wire(const ProposalRequest& request);
json to_wire(const SegmentationRequest& request);

/// Key a request is stored under in a mock fixture: SHA-256 of the canonical body.
std::string request_key(const json& body);

/// Something that answers JSON POSTs on the two backend routes.
class Backend {
  public:
    virtual ~Backend() = default;
    /// Throws TransportError (retryable), MalformedResponse or MissingFixture.
    virtual json post(std::string_view route, const json& body) = 0;
};

struct BackendPair {
    std::shared_ptr<Backend> proposer;
    std::shared_ptr<Backend> segmenter;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{100};
};

/// HTTP JSON client. Safe to share between threads; each call opens its own connection.
class HttpBackend final : public Backend {
  public:
    HttpBackend(std::string base_url, RetryPolicy retry = {}, int max_in_flight = 4,
                std::chrono::milliseconds timeout = std::chrono::seconds(60));

    json post(std::string_view route, const json& body) override;

  private:
    json post_once(std::string_view route, const std::string& payload, const std::string& correlation_id);

    std::string base_url_;
    RetryPolicy retry_;
    std::chrono::milliseconds timeout_;

    std::mutex mutex_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
    int max_in_flight_;
    unsigned long long next_id_ = 0;
};

/// Fixture layout:
///   <dir>/fixture.json          optional, {"permissive": bool}
///   <dir>/propose/<key>.json    response body for a /propose request
///   <dir>/segment/<key>.json    response body for a /segment request
/// where <key> is request_key() of the request body. A permissive fixture answers unknown
/// keys with an empty region or mask list.
class MockBackend final : public Backend {
  public:
    explicit MockBackend(std::string fixture_dir);
    MockBackend(std::string fixture_dir, bool permissive);

    json post(std::string_view route, const json& body) override;
    bool permissive() const { return permissive_; }

  private:
    std::string dir_;
    bool permissive_ = false;
};

BackendPair mock_backends(const std::string& fixture_dir);
BackendPair http_backends(const std::string& propose_url, const std::string& segment_url, RetryPolicy retry,
                          int max_in_flight);

/// Parses a /propose response: clamps boxes to the image, drops boxes that collapse,
/// then merges overlapping ones.
std::vector<RegionProposal> parse_proposals(const json& response, Size image, double iou_threshold);

std::vector<RegionProposal> propose_regions(const ProposalRequest& request, Backend& backend,
                                            double iou_threshold = kDefaultIouThreshold);

/// Run-length mask: counts alternate off/on, starting with off, row-major.
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<long long> counts;
};

BinaryMask decode_rle(const RleMask& rle);
RleMask encode_rle(const BinaryMask& mask);

/// Parses a /segment response. Masks of a different size than target are resized
/// nearest-neighbour when target is given.
std::vector<CandidateMask> parse_masks(const json& response, std::optional<Size> target = std::nullopt);

/// Two-pass confidence filter. Primary: every mask with confidence >= tau_high. If none,
/// fallback: the n_fallback best with confidence >= tau_low. Output is sorted by confidence
/// descending, ties in input order.
std::vector<CandidateMask> cascade_filter(std::vector<CandidateMask> masks, const FallbackConfig& cfg);

std::vector<CandidateMask> segment_cascaded(const SegmentationRequest& request, const FallbackConfig& cfg,
                                            Backend& backend, std::optional<Size> target = std::nullopt);

} // namespace gazedecouple
