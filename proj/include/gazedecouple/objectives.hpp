#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gazedecouple/metrics.hpp"
#include "gazedecouple/raster.hpp"

namespace gazedecouple {

struct LossConfig {
    double lambda1 = 0.2;
    double lambda2 = 3.0;
    double alpha = 0.5;
    double w_min = 0.2;
    double w_max = 3.0;
    double epsilon = kDefaultEpsilon;

    void validate() const;
};

/// Normalized gaze frequency, max-normalized so the peak is 1.
class FrequencyMap {
  public:
    explicit FrequencyMap(Raster raster);
    const Raster& raster() const { return raster_; }
    Size size() const { return raster_.size(); }

  private:
    Raster raster_;
};

/// Streaming pixel-wise mean of ground-truth maps. Maps of another size are bilinearly
/// resized to the size of the first map.
class FrequencyAccumulator {
  public:
    void add(const Raster& map);
    std::size_t count() const { return count_; }
    /// Throws InvalidArgument when nothing was added or the mean is all zero.
    FrequencyMap finish() const;

  private:
    Size size_;
    std::vector<double> sum_;
    std::size_t count_ = 0;
};

FrequencyMap aggregate_frequency(std::span<const Raster> gt_maps);

/// Per-pixel loss weights in [w_min, w_max]. Not a Raster: values exceed 1.
class SpatialWeightMatrix {
  public:
    SpatialWeightMatrix(Size size, std::vector<double> weights);

    Size size() const { return size_; }
    std::span<const double> values() const { return weights_; }
    double at(int x, int y) const { return weights_[static_cast<std::size_t>(y) * size_.width + x]; }

    /// Every weight multiplied by factor (> 0).
    SpatialWeightMatrix scaled(double factor) const;
    static SpatialWeightMatrix uniform(Size size, double weight);

  private:
    Size size_;
    std::vector<double> weights_;
};

/// W = w_max - (w_max - w_min) * F.
SpatialWeightMatrix spatial_weight_matrix(const FrequencyMap& freq, const LossConfig& cfg);

inline constexpr double kBceClamp = 1e-7;

/// (1/N) sum W * BCE(pred, gt), with pred clamped to [kBceClamp, 1 - kBceClamp].
double weighted_bce(const Raster& pred, const Raster& gt, const SpatialWeightMatrix& weights);

/// Normalizes both maps to distributions, then KL(gt || pred).
double kl_loss(const Raster& gt, const Raster& pred, double epsilon = kDefaultEpsilon);

struct RegionPair {
    Raster gt;
    Raster pred;
};

/// Sum of kl_loss over all object-level pairs; 0 when there are none.
double region_loss(std::span<const RegionPair> pairs, double epsilon = kDefaultEpsilon);

double global_loss(const Raster& pred, const Raster& gt, const SpatialWeightMatrix& weights,
                   const LossConfig& cfg);

double total_loss(double text_nll, double region, double global, const LossConfig& cfg);

/// -sum of per-token log-probabilities supplied by an external language model.
double text_nll(std::span<const double> logprobs);

} // namespace gazedecouple
