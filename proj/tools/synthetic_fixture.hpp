#pragma once

#include <cstdint>
#include <string>

namespace gazedecouple::fixture {

/// Writes a self-contained synthetic annotation fixture:
///   images/<id>.png, heatmaps/<id>.png, manifest.jsonl and mock/ (backend responses keyed
///   for the default pipeline configuration).
/// The samples cover every selection branch: validated, relaxed, hallucinated by zero
/// attention and by an empty segmentation, fallback segmentation, duplicate and
/// out-of-bounds boxes, RLE and PNG masks, and masks at a different resolution.
void make_synthetic_fixture(const std::string& dir, int n_samples = 10, std::uint64_t seed = 7);

} // namespace gazedecouple::fixture
