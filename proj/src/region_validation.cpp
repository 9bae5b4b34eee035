#include "gazedecouple/region_validation.hpp"

#include <string>

#include "gazedecouple/error.hpp"

namespace gazedecouple {

std::string_view to_string(ValidationStatus status) {
    switch (status) {
    case ValidationStatus::Validated:
        return "validated";
    case ValidationStatus::RelaxedBest:
        return "relaxed_best";
    case ValidationStatus::Hallucinated:
        return "hallucinated";
    }
    return "unknown";
}

ValidationStatus parse_validation_status(std::string_view name) {
    if (name == "validated") {
        return ValidationStatus::Validated;
    }
    if (name == "relaxed_best") {
        return ValidationStatus::RelaxedBest;
    }
    if (name == "hallucinated") {
        return ValidationStatus::Hallucinated;
    }
    throw InvalidArgument("unknown validation status '" + std::string(name) + "'");
}

void ValidationConfig::validate() const {
    if (!(tau_attn > 0.0 && tau_attn < 1.0)) {
        throw ConfigError("tau_attn must be in (0,1), got " + std::to_string(tau_attn));
    }
}

Selection select_valid_masks(std::span<const CandidateMask> candidates, const Raster& heatmap,
                             const ValidationConfig& cfg) {
    Selection sel;
    if (candidates.empty()) {
        sel.masks.push_back(BinaryMask::empty(heatmap.size()));
        sel.which = SelectionCase::NoCandidates;
        return sel;
    }

    sel.candidate_mu.reserve(candidates.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        sel.candidate_mu.push_back(mean_attention_intensity(candidates[i].mask, heatmap));
        if (sel.candidate_mu[i] > sel.candidate_mu[best]) {
            best = i;
        }
    }
    const double mu_max = sel.candidate_mu[best];

    if (mu_max > cfg.tau_attn) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (sel.candidate_mu[i] > cfg.tau_attn) {
                sel.masks.push_back(candidates[i].mask);
            }
        }
        sel.which = SelectionCase::AboveThreshold;
    } else if (mu_max > 0.0) {
        sel.masks.push_back(candidates[best].mask);
        sel.which = SelectionCase::RelaxedArgmax;
    } else {
        sel.masks.push_back(BinaryMask::empty(heatmap.size()));
        sel.which = SelectionCase::ZeroAttention;
    }
    return sel;
}

ValidatedRegion validate_region(const RegionProposal& proposal, std::span<const CandidateMask> candidates,
                                const Raster& heatmap, const ValidationConfig& cfg) {
    Selection sel = select_valid_masks(candidates, heatmap, cfg);
    BinaryMask fused = fuse_masks(sel.masks);
    const double mu = mean_attention_intensity(fused, heatmap);

    ValidationStatus status = ValidationStatus::Hallucinated;
    switch (sel.which) {
    case SelectionCase::AboveThreshold:
        status = ValidationStatus::Validated;
        break;
    case SelectionCase::RelaxedArgmax:
        status = ValidationStatus::RelaxedBest;
        break;
    case SelectionCase::ZeroAttention:
    case SelectionCase::NoCandidates:
        status = ValidationStatus::Hallucinated;
        break;
    }
    return ValidatedRegion{proposal, std::move(fused), mu, status, std::move(sel.candidate_mu)};
}

} // namespace gazedecouple
