#include <gtest/gtest.h>

#include <opencv2/imgcodecs.hpp>

#include "gazedecouple/error.hpp"
#include "gazedecouple/raster.hpp"
#include "support.hpp"

using namespace gazedecouple;
using gazedecouple::testing::box_mask;
using gazedecouple::testing::random_mask;
using gazedecouple::testing::random_raster;

namespace {

Bytes encode(const cv::Mat& m) {
    std::vector<std::uint8_t> buf;
    cv::imencode(".png", m, buf);
    return buf;
}

RegionProposal prop(BBox b, std::string d, std::string c = "") { return {b, std::move(d), std::move(c)}; }

} // namespace

TEST(Raster, RejectsOutOfRangeValuesAndBadShape) {
    EXPECT_THROW(Raster({2, 1}, {0.5, 1.5}), InvalidArgument);
    EXPECT_THROW(Raster({2, 1}, {-0.1, 0.5}), InvalidArgument);
    EXPECT_THROW(Raster({2, 2}, {0.5}), InvalidArgument);
    EXPECT_THROW(Raster({0, 2}, {}), InvalidArgument);
    EXPECT_NO_THROW(Raster({2, 1}, {0.0, 1.0}));
}

TEST(Codec, EightBitHeatmapNormalizesByDepth) {
    cv::Mat m(1, 3, CV_8UC1);
    m.at<std::uint8_t>(0, 0) = 0;
    m.at<std::uint8_t>(0, 1) = 51;
    m.at<std::uint8_t>(0, 2) = 255;
    const Raster r = load_heatmap(encode(m));
    EXPECT_EQ(r.size(), (Size{3, 1}));
    EXPECT_EQ(r.at(0, 0), 0.0);
    EXPECT_EQ(r.at(1, 0), 0.2);
    EXPECT_EQ(r.at(2, 0), 1.0);
}

TEST(Codec, SixteenBitHeatmapNormalizesByDepth) {
    cv::Mat m(1, 2, CV_16UC1);
    m.at<std::uint16_t>(0, 0) = 65535;
    m.at<std::uint16_t>(0, 1) = 255;
    const Raster r = load_heatmap(encode(m));
    EXPECT_EQ(r.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(r.at(1, 0), 255.0 / 65535.0);
}

TEST(Codec, RejectsColorAndGarbage) {
    cv::Mat rgb(2, 2, CV_8UC3, cv::Scalar(1, 2, 3));
    EXPECT_THROW(load_heatmap(encode(rgb)), DecodeError);
    const Bytes junk{1, 2, 3, 4, 5};
    EXPECT_THROW(load_heatmap(junk), DecodeError);
    EXPECT_THROW(decode_mask_image(junk), DecodeError);
}

TEST(Codec, Png16RoundTripMatchesQuantize) {
    std::mt19937_64 rng(3);
    const Raster r = random_raster(rng, {9, 7});
    const Raster back = load_heatmap(encode_raster_png16(r));
    for (std::size_t i = 0; i < r.values().size(); ++i) {
        EXPECT_EQ(back.values()[i], quantize16(r.values()[i]));
    }
}

TEST(Codec, MaskPngRoundTrip) {
    std::mt19937_64 rng(4);
    const BinaryMask m = random_mask(rng, {13, 5});
    const Bytes png = encode_mask_png(m);
    EXPECT_EQ(decode_mask_image(png), m);
    EXPECT_EQ(probe_image_size(png), (Size{13, 5}));
}

TEST(Algebra, MeanIntensityMatchesNaiveLoop) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Raster h = random_raster(rng, {64, 64}, 0.3);
        const BinaryMask m = random_mask(rng, {64, 64}, 0.2);
        double sum = 0.0;
        int n = 0;
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                if (m.at(x, y)) {
                    sum += h.at(x, y);
                    ++n;
                }
            }
        }
        const double mu = mean_attention_intensity(m, h);
        EXPECT_NEAR(mu, n == 0 ? 0.0 : sum / n, 1e-12);
        EXPECT_GE(mu, 0.0);
        EXPECT_LE(mu, h.max());
    }
}

TEST(Algebra, MeanIntensityOfEmptyMaskIsZero) {
    EXPECT_EQ(mean_attention_intensity(BinaryMask::empty({4, 4}), Raster::filled({4, 4}, 0.7)), 0.0);
    EXPECT_THROW(mean_attention_intensity(BinaryMask::empty({4, 4}), Raster::filled({4, 5}, 0.7)), DimensionMismatch);
}

TEST(Algebra, HadamardKeepsSupportAndZeroesRest) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Raster g = random_raster(rng, {17, 9});
        const BinaryMask m = random_mask(rng, {17, 9});
        const Raster r = hadamard_decouple(g, m);
        for (int y = 0; y < 9; ++y) {
            for (int x = 0; x < 17; ++x) {
                EXPECT_EQ(r.at(x, y), m.at(x, y) ? g.at(x, y) : 0.0);
            }
        }
    }
    EXPECT_THROW(hadamard_decouple(Raster::filled({3, 3}, 0.5), BinaryMask::full({3, 4})), DimensionMismatch);
}

TEST(Algebra, FuseIsUnionAndIdempotent) {
    std::mt19937_64 rng(13);
    const std::vector<BinaryMask> ms{random_mask(rng, {8, 8}), random_mask(rng, {8, 8}), random_mask(rng, {8, 8})};
    const BinaryMask f = fuse_masks(ms);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            EXPECT_EQ(f.at(x, y), ms[0].at(x, y) || ms[1].at(x, y) || ms[2].at(x, y));
        }
    }
    const std::vector<BinaryMask> twice{ms[0], ms[0]};
    EXPECT_EQ(fuse_masks(twice), ms[0]);
    EXPECT_THROW(fuse_masks(std::span<const BinaryMask>{}), InvalidArgument);
}

TEST(Boxes, ClampToImage) {
    EXPECT_EQ(clamp_bbox({-5, 0, 10, 10}, {64, 48}), (BBox{0, 0, 10, 10}));
    EXPECT_EQ(clamp_bbox({50, 40, 90, 70}, {64, 48}), (BBox{50, 40, 64, 48}));
    EXPECT_FALSE(clamp_bbox({70, 0, 90, 10}, {64, 48}).valid());
}

TEST(Boxes, IouExamples) {
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0);
}

TEST(Boxes, MergeAtThresholdProducesHull) {
    const std::vector<RegionProposal> in{prop({0, 0, 10, 10}, "red car", "ahead"), prop({5, 0, 15, 10}, "red sedan", "ahead")};
    const auto kept = merge_overlapping_boxes(in, 0.5);
    EXPECT_EQ(kept.size(), 2u);
    const auto merged = merge_overlapping_boxes(in, 0.3);
    ASSERT_EQ(merged.size(), 1u);
    EXPECT_EQ(merged[0].bbox, (BBox{0, 0, 15, 10}));
    EXPECT_EQ(merged[0].description, "red car; red sedan");
    EXPECT_EQ(merged[0].cause, "ahead");
}

TEST(Boxes, MergeIsIdempotentAndLeavesNoOverlapAboveThreshold) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> pos(0, 40);
    std::uniform_int_distribution<int> len(3, 20);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<RegionProposal> in;
        const int n = 1 + trial % 8;
        for (int i = 0; i < n; ++i) {
            const int x = pos(rng);
            const int y = pos(rng);
            in.push_back(prop({x, y, x + len(rng), y + len(rng)}, "obj" + std::to_string(i)));
        }
        const auto once = merge_overlapping_boxes(in, 0.5);
        EXPECT_LE(once.size(), in.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            for (std::size_t j = i + 1; j < once.size(); ++j) {
                EXPECT_LT(iou(once[i].bbox, once[j].bbox), 0.5);
            }
        }
        EXPECT_EQ(merge_overlapping_boxes(once, 0.5), once);
    }
}

TEST(Boxes, MergeRejectsBadThreshold) {
    const std::vector<RegionProposal> in{prop({0, 0, 1, 1}, "a")};
    EXPECT_THROW(merge_overlapping_boxes(in, 0.0), InvalidArgument);
    EXPECT_THROW(merge_overlapping_boxes(in, 1.5), InvalidArgument);
}

TEST(Resample, BilinearStaysInRangeAndNearestKeepsBinary) {
    std::mt19937_64 rng(5);
    const Raster r = resize_bilinear(random_raster(rng, {10, 10}), {23, 17});
    EXPECT_EQ(r.size(), (Size{23, 17}));
    const BinaryMask m = resize_nearest(box_mask({4, 4}, {0, 0, 2, 2}), {8, 8});
    EXPECT_EQ(m, box_mask({8, 8}, {0, 0, 4, 4}));
}
