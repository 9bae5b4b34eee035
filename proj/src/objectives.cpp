#include "gazedecouple/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gazedecouple/error.hpp"

namespace gazedecouple {

void LossConfig::validate() const {
    if (!(w_min > 0.0)) {
        throw ConfigError("w_min must be > 0, got " + std::to_string(w_min));
    }
    if (!(w_min < w_max)) {
        throw ConfigError("w_max must exceed w_min");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be > 0, got " + std::to_string(epsilon));
    }
    for (auto [name, v] : {std::pair{"lambda1", lambda1}, std::pair{"lambda2", lambda2}, std::pair{"alpha", alpha}}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ConfigError(std::string(name) + " must be finite and >= 0");
        }
    }
}

// ---- frequency ----

FrequencyMap::FrequencyMap(Raster raster) : raster_(std::move(raster)) {}

void FrequencyAccumulator::add(const Raster& map) {
    if (count_ == 0) {
        size_ = map.size();
        sum_.assign(size_.area(), 0.0);
    }
    const Raster resized = resize_bilinear(map, size_);
    const auto v = resized.values();
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        sum_[i] += v[i];
    }
    ++count_;
}

FrequencyMap FrequencyAccumulator::finish() const {
    if (count_ == 0) {
        throw InvalidArgument("frequency aggregation needs at least one map");
    }
    const double peak = *std::max_element(sum_.begin(), sum_.end());
    if (!(peak > 0.0)) {
        throw InvalidArgument("aggregate frequency is all zero");
    }
    // mean / max(mean) == sum / max(sum)
    std::vector<double> out(sum_.size());
    std::transform(sum_.begin(), sum_.end(), out.begin(), [peak](double s) { return s / peak; });
    return FrequencyMap(Raster(size_, std::move(out)));
}

FrequencyMap aggregate_frequency(std::span<const Raster> gt_maps) {
    FrequencyAccumulator acc;
    for (const auto& m : gt_maps) {
        acc.add(m);
    }
    return acc.finish();
}

// ---- weights ----

SpatialWeightMatrix::SpatialWeightMatrix(Size size, std::vector<double> weights)
    : size_(size), weights_(std::move(weights)) {
    if (size_.width <= 0 || size_.height <= 0 || weights_.size() != size_.area()) {
        throw InvalidArgument("weight matrix shape mismatch");
    }
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0) {
            throw InvalidArgument("weights must be finite and non-negative");
        }
    }
}

SpatialWeightMatrix SpatialWeightMatrix::scaled(double factor) const {
    std::vector<double> w(weights_);
    for (double& x : w) {
        x *= factor;
    }
    return SpatialWeightMatrix(size_, std::move(w));
}

SpatialWeightMatrix SpatialWeightMatrix::uniform(Size size, double weight) {
    return SpatialWeightMatrix(size, std::vector<double>(size.area(), weight));
}

SpatialWeightMatrix spatial_weight_matrix(const FrequencyMap& freq, const LossConfig& cfg) {
    const auto f = freq.raster().values();
    std::vector<double> w(f.size());
    // lerp is exact at both endpoints and monotone in between
    for (std::size_t i = 0; i < f.size(); ++i) {
        w[i] = std::clamp(std::lerp(cfg.w_max, cfg.w_min, f[i]), cfg.w_min, cfg.w_max);
    }
    return SpatialWeightMatrix(freq.size(), std::move(w));
}

// ---- losses ----

double weighted_bce(const Raster& pred, const Raster& gt, const SpatialWeightMatrix& weights) {
    if (pred.size() != gt.size() || pred.size() != weights.size()) {
        throw DimensionMismatch("weighted_bce: " + to_string(pred.size()) + ", " + to_string(gt.size()) + ", " +
                                to_string(weights.size()));
    }
    const auto p = pred.values();
    const auto g = gt.values();
    const auto w = weights.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
        sum += w[i] * (-g[i] * std::log(q) - (1.0 - g[i]) * std::log(1.0 - q));
    }
    return sum / static_cast<double>(p.size());
}

double kl_loss(const Raster& gt, const Raster& pred, double epsilon) {
    if (gt.size() != pred.size()) {
        throw DimensionMismatch("kl_loss: " + to_string(gt.size()) + " vs " + to_string(pred.size()));
    }
    return kl_divergence(normalize_distribution(gt), normalize_distribution(pred), epsilon);
}

double region_loss(std::span<const RegionPair> pairs, double epsilon) {
    double sum = 0.0;
    for (const auto& pair : pairs) {
        sum += kl_loss(pair.gt, pair.pred, epsilon);
    }
    return sum;
}

double global_loss(const Raster& pred, const Raster& gt, const SpatialWeightMatrix& weights,
                   const LossConfig& cfg) {
    return weighted_bce(pred, gt, weights) + cfg.alpha * kl_loss(gt, pred, cfg.epsilon);
}

double total_loss(double text_nll, double region, double global, const LossConfig& cfg) {
    return text_nll + cfg.lambda1 * region + cfg.lambda2 * global;
}

double text_nll(std::span<const double> logprobs) {
    double sum = 0.0;
    for (double lp : logprobs) {
        if (!std::isfinite(lp) || lp > 0.0) {
            throw InvalidArgument("token log-probabilities must be finite and <= 0");
        }
        sum -= lp;
    }
    return sum;
}

} // namespace gazedecouple
