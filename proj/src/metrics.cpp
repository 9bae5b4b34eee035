#include "gazedecouple/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "gazedecouple/error.hpp"

namespace gazedecouple {

namespace {

void require_same(Size a, Size b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
    }
}

/// Unique, in-bounds fixation indices.
std::vector<std::size_t> fixation_indices(Size size, const FixationSet& fixations) {
    std::vector<std::size_t> idx;
    idx.reserve(fixations.size());
    for (const auto& p : fixations) {
        if (p.x < 0 || p.y < 0 || p.x >= size.width || p.y >= size.height) {
            throw InvalidArgument("fixation (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                  ") outside " + to_string(size));
        }
        idx.push_back(static_cast<std::size_t>(p.y) * size.width + p.x);
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.empty()) {
        throw InvalidArgument("AUC needs at least one fixation");
    }
    if (idx.size() == size.area()) {
        throw InvalidArgument("AUC needs at least one non-fixation pixel");
    }
    return idx;
}

/// Uniform integer in [0, bound) from raw 64-bit draws; portable unlike std distributions.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = 0;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

} // namespace

Distribution::Distribution(Raster raster) : raster_(std::move(raster)) {
    const auto v = raster_.values();
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (std::abs(sum - 1.0) > kDistributionTolerance) {
        throw InvalidArgument("distribution must sum to 1, got " + std::to_string(sum));
    }
}

Distribution normalize_distribution(const Raster& map) {
    const auto v = map.values();
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(sum > 0.0)) {
        throw InvalidArgument("cannot normalize an all-zero map");
    }
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [sum](double x) { return x / sum; });
    return Distribution(Raster(map.size(), std::move(out)));
}

double kl_divergence(const Distribution& gt, const Distribution& pred, double epsilon) {
    require_same(gt.size(), pred.size(), "kl_divergence");
    if (!(epsilon >= 0.0)) {
        throw InvalidArgument("epsilon must be non-negative");
    }
    const auto g = gt.values();
    const auto p = pred.values();
    double kl = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] > 0.0) {
            kl += g[i] * std::log(g[i] / (p[i] + epsilon));
        }
    }
    return kl;
}

double pearson_cc(const Raster& pred, const Raster& gt) {
    require_same(pred.size(), gt.size(), "pearson_cc");
    const auto p = pred.values();
    const auto g = gt.values();
    const double n = static_cast<double>(p.size());
    const double mp = std::accumulate(p.begin(), p.end(), 0.0) / n;
    const double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
    double cov = 0.0;
    double vp = 0.0;
    double vg = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double dp = p[i] - mp;
        const double dg = g[i] - mg;
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(p) || constant(g) || vp == 0.0 || vg == 0.0) {
        throw InvalidArgument("correlation undefined for a constant map");
    }
    return cov / std::sqrt(vp * vg);
}

double similarity(const Distribution& pred, const Distribution& gt) {
    require_same(pred.size(), gt.size(), "similarity");
    const auto p = pred.values();
    const auto g = gt.values();
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += std::min(p[i], g[i]);
    }
    return s;
}

FixationSet extract_fixations(const Raster& gt, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidArgument("fixation level must be in (0,1), got " + std::to_string(level));
    }
    const double peak = gt.max();
    if (!(peak > 0.0)) {
        throw InvalidArgument("cannot extract fixations from an all-zero map");
    }
    const double cut = level * peak;
    FixationSet out;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (gt.at(x, y) >= cut) {
                out.push_back({x, y});
            }
        }
    }
    return out;
}

double roc_auc(std::span<const double> positives, std::span<const double> negatives) {
    if (positives.empty() || negatives.empty()) {
        throw InvalidArgument("ROC needs positives and negatives");
    }
    struct Scored {
        double score;
        bool positive;
    };
    std::vector<Scored> all;
    all.reserve(positives.size() + negatives.size());
    for (double s : positives) {
        all.push_back({s, true});
    }
    for (double s : negatives) {
        all.push_back({s, false});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

    const double np = static_cast<double>(positives.size());
    const double nn = static_cast<double>(negatives.size());
    double tp = 0.0;
    double fp = 0.0;
    double area = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        const double threshold = all[i].score;
        double gp = 0.0;
        double gn = 0.0;
        for (; i < all.size() && all[i].score == threshold; ++i) {
            (all[i].positive ? gp : gn) += 1.0;
        }
        // trapezoid between the previous and this operating point
        area += gn * (2.0 * tp + gp) / 2.0;
        tp += gp;
        fp += gn;
    }
    return area / (np * nn);
}

double auc_judd(const Raster& pred, const FixationSet& fixations) {
    const auto idx = fixation_indices(pred.size(), fixations);
    const auto v = pred.values();
    std::vector<double> pos;
    std::vector<double> neg;
    pos.reserve(idx.size());
    neg.reserve(v.size() - idx.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (k < idx.size() && idx[k] == i) {
            pos.push_back(v[i]);
            ++k;
        } else {
            neg.push_back(v[i]);
        }
    }
    return roc_auc(pos, neg);
}

BorjiResult auc_borji(const Raster& pred, const FixationSet& fixations, int n_splits, std::uint64_t seed) {
    if (n_splits < 1) {
        throw InvalidArgument("n_splits must be >= 1");
    }
    const auto idx = fixation_indices(pred.size(), fixations);
    const auto v = pred.values();
    std::vector<double> pos;
    std::vector<std::size_t> pool;
    pos.reserve(idx.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (k < idx.size() && idx[k] == i) {
            pos.push_back(v[i]);
            ++k;
        } else {
            pool.push_back(i);
        }
    }
    if (pool.size() < pos.size()) {
        throw InvalidArgument("AUC-Borji needs at least as many non-fixation pixels as fixations");
    }

    std::mt19937_64 rng(seed);
    std::vector<double> aucs;
    aucs.reserve(static_cast<std::size_t>(n_splits));
    std::vector<double> neg(pos.size());
    for (int s = 0; s < n_splits; ++s) {
        // partial Fisher-Yates: the first |pos| slots become the sample
        for (std::size_t j = 0; j < pos.size(); ++j) {
            const std::size_t r = j + static_cast<std::size_t>(uniform_below(rng, pool.size() - j));
            std::swap(pool[j], pool[r]);
            neg[j] = v[pool[j]];
        }
        aucs.push_back(roc_auc(pos, neg));
    }
    const double n = static_cast<double>(aucs.size());
    const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / n;
    double var = 0.0;
    for (double a : aucs) {
        var += (a - mean) * (a - mean);
    }
    return {mean, std::sqrt(var / n)};
}

} // namespace gazedecouple
