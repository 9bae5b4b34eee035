#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gazedecouple {

using Bytes = std::vector<std::uint8_t>;

struct Size {
    int width = 0;
    int height = 0;

    std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool operator==(const Size&) const = default;
};

std::string to_string(Size size);

/// Dense row-major map of reals in [0,1]: heatmaps, gaze maps, decoupled region maps.
class Raster {
  public:
    /// Throws InvalidArgument on non-positive dimensions, wrong length, or values outside [0,1].
    Raster(Size size, std::vector<double> values);

    static Raster filled(Size size, double value);

    Size size() const { return size_; }
    int width() const { return size_.width; }
    int height() const { return size_.height; }

    double at(int x, int y) const { return values_[index(x, y)]; }
    std::span<const double> values() const { return values_; }
    double max() const;

    bool operator==(const Raster&) const = default;

  private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) + static_cast<std::size_t>(x);
    }

    Size size_;
    std::vector<double> values_;
};

class BinaryMask {
  public:
    BinaryMask(Size size, std::vector<std::uint8_t> bits);

    static BinaryMask empty(Size size);
    static BinaryMask full(Size size);

    Size size() const { return size_; }
    int width() const { return size_.width; }
    int height() const { return size_.height; }

    bool at(int x, int y) const {
        return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) + static_cast<std::size_t>(x)] != 0;
    }
    /// One byte per pixel, 0 or 1.
    std::span<const std::uint8_t> bits() const { return bits_; }
    std::size_t count() const;
    bool any() const { return count() != 0; }

    bool operator==(const BinaryMask&) const = default;

  private:
    Size size_;
    std::vector<std::uint8_t> bits_;
};

/// Pixel box, inclusive-exclusive: [x_min, x_max) x [y_min, y_max).
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    long long area() const;
    bool valid() const { return x_min < x_max && y_min < y_max; }
    bool operator==(const BBox&) const = default;
};

/// Clamps to [0,width] x [0,height]. The result may be degenerate (check valid()).
BBox clamp_bbox(BBox box, Size image);
double iou(const BBox& a, const BBox& b);
BBox hull(const BBox& a, const BBox& b);

struct RegionProposal {
    BBox bbox;
    std::string description;
    std::string cause;

    bool operator==(const RegionProposal&) const = default;
};

struct CandidateMask {
    BinaryMask mask;
    double confidence = 0.0;
};

// ---- image codecs ----

/// Decodes an 8- or 16-bit single-channel image; values are pixel / (2^depth - 1).
Raster load_heatmap(std::span<const std::uint8_t> bytes);
Raster load_heatmap_file(const std::string& path);

/// Any decodable image; non-zero pixels (in any channel) are set.
BinaryMask decode_mask_image(std::span<const std::uint8_t> bytes);
/// 8-bit grayscale PNG with values {0, 255}.
Bytes encode_mask_png(const BinaryMask& mask);
/// 16-bit grayscale PNG, value = round(v * 65535).
Bytes encode_raster_png16(const Raster& raster);
/// Width and height of any decodable image, read from the header.
Size probe_image_size(std::span<const std::uint8_t> bytes);

/// Value a raster takes after a round-trip through encode_raster_png16.
double quantize16(double v);

// ---- resampling ----

/// Bilinear resize, re-clamped to [0,1].
Raster resize_bilinear(const Raster& raster, Size target);
BinaryMask resize_nearest(const BinaryMask& mask, Size target);

// ---- algebra ----

/// Mean heatmap value under the mask; 0 for an all-false mask.
double mean_attention_intensity(const BinaryMask& mask, const Raster& heatmap);

/// Keeps global values on the mask support and zeroes the rest.
Raster hadamard_decouple(const Raster& global_map, const BinaryMask& mask);

/// Pixel-wise OR. Throws on an empty list or mismatched sizes.
BinaryMask fuse_masks(std::span<const BinaryMask> masks);

inline constexpr double kDefaultIouThreshold = 0.5;
inline constexpr const char* kDescriptionSeparator = "; ";

/// Greedy union-hull merge until no pair reaches the threshold. Output order follows
/// the first occurrence of each merged group.
std::vector<RegionProposal> merge_overlapping_boxes(std::span<const RegionProposal> proposals,
                                                    double iou_threshold = kDefaultIouThreshold);

} // namespace gazedecouple
