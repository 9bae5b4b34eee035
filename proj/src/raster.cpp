#include "gazedecouple/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gazedecouple/error.hpp"

namespace gazedecouple {

namespace {

void require_positive(Size size) {
    if (size.width <= 0 || size.height <= 0) {
        throw InvalidArgument("raster dimensions must be positive, got " + to_string(size));
    }
}

void require_same(Size a, Size b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
    }
}

cv::Mat decode(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty()) {
        throw DecodeError("empty image buffer");
    }
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, flags);
    } catch (const cv::Exception& e) {
        throw DecodeError(std::string("image decode failed: ") + e.what());
    }
    if (img.empty() || img.rows == 0 || img.cols == 0) {
        throw DecodeError("image decode failed or zero-sized image");
    }
    return img;
}

Bytes encode_png(const cv::Mat& img) {
    std::vector<uchar> out;
    // Fixed compression parameters keep the output byte-stable.
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6, cv::IMWRITE_PNG_STRATEGY,
                                  cv::IMWRITE_PNG_STRATEGY_DEFAULT};
    if (!cv::imencode(".png", img, out, params)) {
        throw Error("PNG encoding failed");
    }
    return Bytes(out.begin(), out.end());
}

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DecodeError("cannot open " + path);
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

std::string to_string(Size size) { return std::to_string(size.width) + "x" + std::to_string(size.height); }

// ---- Raster ----

Raster::Raster(Size size, std::vector<double> values) : size_(size), values_(std::move(values)) {
    require_positive(size_);
    if (values_.size() != size_.area()) {
        throw InvalidArgument("raster of " + to_string(size_) + " needs " + std::to_string(size_.area()) +
                              " values, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidArgument("raster value outside [0,1]: " + std::to_string(v));
        }
    }
}

Raster Raster::filled(Size size, double value) {
    require_positive(size);
    return Raster(size, std::vector<double>(size.area(), value));
}

double Raster::max() const { return *std::max_element(values_.begin(), values_.end()); }

// ---- BinaryMask ----

BinaryMask::BinaryMask(Size size, std::vector<std::uint8_t> bits) : size_(size), bits_(std::move(bits)) {
    require_positive(size_);
    if (bits_.size() != size_.area()) {
        throw InvalidArgument("mask of " + to_string(size_) + " needs " + std::to_string(size_.area()) +
                              " bits, got " + std::to_string(bits_.size()));
    }
    for (auto& b : bits_) {
        b = b != 0 ? 1 : 0;
    }
}

BinaryMask BinaryMask::empty(Size size) {
    require_positive(size);
    return BinaryMask(size, std::vector<std::uint8_t>(size.area(), 0));
}

BinaryMask BinaryMask::full(Size size) {
    require_positive(size);
    return BinaryMask(size, std::vector<std::uint8_t>(size.area(), 1));
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// ---- BBox ----

long long BBox::area() const {
    if (!valid()) {
        return 0;
    }
    return static_cast<long long>(x_max - x_min) * static_cast<long long>(y_max - y_min);
}

BBox clamp_bbox(BBox box, Size image) {
    box.x_min = std::clamp(box.x_min, 0, image.width);
    box.x_max = std::clamp(box.x_max, 0, image.width);
    box.y_min = std::clamp(box.y_min, 0, image.height);
    box.y_max = std::clamp(box.y_max, 0, image.height);
    return box;
}

double iou(const BBox& a, const BBox& b) {
    const BBox inter{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min), std::min(a.x_max, b.x_max),
                     std::min(a.y_max, b.y_max)};
    const long long i = inter.area();
    const long long u = a.area() + b.area() - i;
    if (u <= 0) {
        return 0.0;
    }
    return static_cast<double>(i) / static_cast<double>(u);
}

BBox hull(const BBox& a, const BBox& b) {
    return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
            std::max(a.y_max, b.y_max)};
}

// ---- codecs ----

Raster load_heatmap(std::span<const std::uint8_t> bytes) {
    const cv::Mat img = decode(bytes, cv::IMREAD_UNCHANGED);
    if (img.channels() != 1) {
        throw DecodeError("heatmap must be single-channel, got " + std::to_string(img.channels()) + " channels");
    }
    double scale = 0.0;
    switch (img.depth()) {
    case CV_8U:
        scale = 255.0;
        break;
    case CV_16U:
        scale = 65535.0;
        break;
    default:
        throw DecodeError("heatmap must be 8- or 16-bit");
    }
    const Size size{img.cols, img.rows};
    std::vector<double> values;
    values.reserve(size.area());
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            const double px = img.depth() == CV_8U ? img.at<std::uint8_t>(y, x) : img.at<std::uint16_t>(y, x);
            values.push_back(px / scale);
        }
    }
    return Raster(size, std::move(values));
}

Raster load_heatmap_file(const std::string& path) {
    const Bytes bytes = read_file(path);
    try {
        return load_heatmap(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path + ": " + e.what());
    }
}

BinaryMask decode_mask_image(std::span<const std::uint8_t> bytes) {
    cv::Mat img = decode(bytes, cv::IMREAD_UNCHANGED);
    if (img.channels() > 1) {
        std::vector<cv::Mat> planes;
        cv::split(img, planes);
        cv::Mat acc = planes[0] != 0;
        for (std::size_t i = 1; i < planes.size(); ++i) {
            acc |= planes[i] != 0;
        }
        img = acc;
    } else {
        img = img != 0;
    }
    const Size size{img.cols, img.rows};
    std::vector<std::uint8_t> bits(size.area());
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            bits[static_cast<std::size_t>(y) * size.width + x] = img.at<std::uint8_t>(y, x) != 0 ? 1 : 0;
        }
    }
    return BinaryMask(size, std::move(bits));
}

Bytes encode_mask_png(const BinaryMask& mask) {
    cv::Mat img(mask.height(), mask.width(), CV_8U);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            img.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
        }
    }
    return encode_png(img);
}

double quantize16(double v) { return std::round(v * 65535.0) / 65535.0; }

Bytes encode_raster_png16(const Raster& raster) {
    cv::Mat img(raster.height(), raster.width(), CV_16U);
    for (int y = 0; y < raster.height(); ++y) {
        for (int x = 0; x < raster.width(); ++x) {
            img.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(raster.at(x, y) * 65535.0));
        }
    }
    return encode_png(img);
}

Size probe_image_size(std::span<const std::uint8_t> bytes) {
    const cv::Mat img = decode(bytes, cv::IMREAD_UNCHANGED);
    return {img.cols, img.rows};
}

// ---- resampling ----

Raster resize_bilinear(const Raster& raster, Size target) {
    require_positive(target);
    if (raster.size() == target) {
        return raster;
    }
    cv::Mat src(raster.height(), raster.width(), CV_64F, const_cast<double*>(raster.values().data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(target.width, target.height), 0, 0, cv::INTER_LINEAR);
    std::vector<double> values(target.area());
    for (int y = 0; y < target.height; ++y) {
        for (int x = 0; x < target.width; ++x) {
            values[static_cast<std::size_t>(y) * target.width + x] = std::clamp(dst.at<double>(y, x), 0.0, 1.0);
        }
    }
    return Raster(target, std::move(values));
}

BinaryMask resize_nearest(const BinaryMask& mask, Size target) {
    require_positive(target);
    if (mask.size() == target) {
        return mask;
    }
    cv::Mat src(mask.height(), mask.width(), CV_8U, const_cast<std::uint8_t*>(mask.bits().data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(target.width, target.height), 0, 0, cv::INTER_NEAREST);
    std::vector<std::uint8_t> bits(target.area());
    for (int y = 0; y < target.height; ++y) {
        for (int x = 0; x < target.width; ++x) {
            bits[static_cast<std::size_t>(y) * target.width + x] = dst.at<std::uint8_t>(y, x);
        }
    }
    return BinaryMask(target, std::move(bits));
}

// ---- algebra ----

double mean_attention_intensity(const BinaryMask& mask, const Raster& heatmap) {
    require_same(mask.size(), heatmap.size(), "mean_attention_intensity");
    const auto bits = mask.bits();
    const auto values = heatmap.values();
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            sum += values[i];
            ++n;
        }
    }
    if (n == 0) {
        return 0.0;
    }
    return sum / static_cast<double>(n);
}

Raster hadamard_decouple(const Raster& global_map, const BinaryMask& mask) {
    require_same(global_map.size(), mask.size(), "hadamard_decouple");
    const auto bits = mask.bits();
    const auto values = global_map.values();
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = bits[i] ? values[i] : 0.0;
    }
    return Raster(global_map.size(), std::move(out));
}

BinaryMask fuse_masks(std::span<const BinaryMask> masks) {
    if (masks.empty()) {
        throw InvalidArgument("fuse_masks needs at least one mask");
    }
    const Size size = masks.front().size();
    std::vector<std::uint8_t> out(size.area(), 0);
    for (const auto& m : masks) {
        require_same(size, m.size(), "fuse_masks");
        const auto bits = m.bits();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] |= bits[i];
        }
    }
    return BinaryMask(size, std::move(out));
}

namespace {

void append_text(std::string& into, const std::string& text) {
    if (text.empty()) {
        return;
    }
    if (into.empty()) {
        into = text;
        return;
    }
    // skip segments already present
    std::size_t start = 0;
    const std::string sep = kDescriptionSeparator;
    while (start <= into.size()) {
        const std::size_t end = std::min(into.find(sep, start), into.size());
        if (into.compare(start, end - start, text) == 0 && end - start == text.size()) {
            return;
        }
        start = end + sep.size();
    }
    into += sep;
    into += text;
}

} // namespace

std::vector<RegionProposal> merge_overlapping_boxes(std::span<const RegionProposal> proposals,
                                                    double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw InvalidArgument("iou_threshold must be in (0,1], got " + std::to_string(iou_threshold));
    }
    std::vector<RegionProposal> out(proposals.begin(), proposals.end());
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < out.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < out.size(); ++j) {
                if (iou(out[i].bbox, out[j].bbox) >= iou_threshold) {
                    out[i].bbox = hull(out[i].bbox, out[j].bbox);
                    append_text(out[i].description, out[j].description);
                    append_text(out[i].cause, out[j].cause);
                    out.erase(out.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                    break;
                }
            }
        }
    }
    return out;
}

} // namespace gazedecouple
