#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazedecouple/raster.hpp"

namespace gazedecouple {

/// A raster whose values sum to one (within 1e-6).
class Distribution {
  public:
    /// Throws InvalidArgument if the sum is off by more than 1e-6.
    explicit Distribution(Raster raster);

    const Raster& raster() const { return raster_; }
    Size size() const { return raster_.size(); }
    std::span<const double> values() const { return raster_.values(); }

  private:
    Raster raster_;
};

inline constexpr double kDistributionTolerance = 1e-6;

/// Divides every value by the total. Throws InvalidArgument on an all-zero map.
Distribution normalize_distribution(const Raster& map);

inline constexpr double kDefaultEpsilon = 1e-8;

/// sum G * log(G / (P + eps)); pixels with G = 0 contribute nothing.
/// eps = 0 is accepted and yields +inf where P = 0 < G.
double kl_divergence(const Distribution& gt, const Distribution& pred, double epsilon = kDefaultEpsilon);

/// Pearson correlation over all pixels. Throws InvalidArgument if either map is constant.
double pearson_cc(const Raster& pred, const Raster& gt);

/// sum min(P, G).
double similarity(const Distribution& pred, const Distribution& gt);

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
};

using FixationSet = std::vector<Pixel>;

inline constexpr double kDefaultFixationLevel = 0.5;

/// Row-major list of pixels with value >= level * max(gt).
FixationSet extract_fixations(const Raster& gt, double level = kDefaultFixationLevel);

/// Area under the ROC curve of positive vs negative scores. Every distinct score is a
/// threshold; tied scores are swept as one group, so ties earn half credit.
double roc_auc(std::span<const double> positives, std::span<const double> negatives);

/// Fixation pixels are positives, every other pixel is a negative.
double auc_judd(const Raster& pred, const FixationSet& fixations);

inline constexpr int kDefaultBorjiSplits = 100;

struct BorjiResult {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mean AUC over n_splits draws of |fixations| negatives sampled without replacement from
/// the non-fixation pixels. Fully determined by seed.
BorjiResult auc_borji(const Raster& pred, const FixationSet& fixations, int n_splits = kDefaultBorjiSplits,
                      std::uint64_t seed = 0);

} // namespace gazedecouple
