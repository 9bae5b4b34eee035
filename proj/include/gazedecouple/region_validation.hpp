#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "gazedecouple/raster.hpp"

namespace gazedecouple {

enum class ValidationStatus { Validated, RelaxedBest, Hallucinated };

std::string_view to_string(ValidationStatus status);
/// Throws InvalidArgument for unknown names.
ValidationStatus parse_validation_status(std::string_view name);

struct ValidationConfig {
    /// Cognitive threshold; candidates must exceed it strictly.
    double tau_attn = 0.2;

    void validate() const;
};

/// Which branch of the hierarchical selection produced a result.
enum class SelectionCase {
    AboveThreshold, // some candidate with mu > tau: keep all of them
    RelaxedArgmax,  // 0 < mu_max <= tau: keep the single best
    ZeroAttention,  // mu_max == 0: all-false sentinel
    NoCandidates,   // empty candidate list, treated as mu_max == 0
};

struct Selection {
    std::vector<BinaryMask> masks; // never empty
    SelectionCase which = SelectionCase::NoCandidates;
    std::vector<double> candidate_mu; // one per input candidate, in input order
};

/// Hierarchical selection of candidate masks against the heatmap.
/// Ties for the relaxed argmax go to the lowest candidate index.
Selection select_valid_masks(std::span<const CandidateMask> candidates, const Raster& heatmap,
                             const ValidationConfig& cfg);

struct ValidatedRegion {
    RegionProposal proposal;
    BinaryMask final_mask;
    double mu_attn = 0.0;
    ValidationStatus status = ValidationStatus::Hallucinated;
    /// Pre-fusion mu of every candidate, kept for auditing.
    std::vector<double> candidate_mu;
};

/// Selection followed by OR-fusion into the final object mask.
ValidatedRegion validate_region(const RegionProposal& proposal, std::span<const CandidateMask> candidates,
                                const Raster& heatmap, const ValidationConfig& cfg);

} // namespace gazedecouple
