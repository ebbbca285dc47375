#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "volnet/network.hpp"
#include "volnet/series.hpp"

namespace volnet {

/// Per-voxel squared input gradient of the model output for one sample.
/// Both target groups yield the same map: the group-0 output is 1 - p, so
/// its gradient is the negation and the square is identical.
struct SensitivityMap {
    Volume voxels; // non-negative, sample-shaped
    std::string subject_id;
    std::size_t window_index = 0;
    int target_group = 1;
};

/// One forward and one backward pass; the map is computed on the normalized
/// input space and not rescaled.
SensitivityMap sensitivity_map(const CnnConfig& config, CnnParams& params,
                               const Sample3D& normalized_sample, int target_group);

struct GroupSensitivity {
    int group = 0;
    Volume mean_map;
    std::size_t n_samples = 0;
    double threshold_percentile = 0.0;
    double threshold_value = 0.0;
    Volume region_mask; // empty until threshold_regions fills it
};

/// Voxelwise mean over the maps, reduced by pairwise summation so the
/// result is permutation-invariant to within rounding.
GroupSensitivity aggregate_group(std::span<const SensitivityMap> maps, int group);

/// Two-level alternative: mean per subject first, then mean over subjects,
/// so subjects with many windows do not dominate the group map.
GroupSensitivity aggregate_group_per_subject(std::span<const SensitivityMap> maps, int group);

/// Percentile of the values by linear interpolation over the sorted order.
double percentile_value(const Volume& volume, double percentile);

/// Binary mask of voxels with mean_map >= the percentile value (ties
/// included); also recorded on the GroupSensitivity.
Volume threshold_regions(GroupSensitivity& group_sens, double percentile);

/// Overlap 2|A&B| / (|A|+|B|) between two binary masks.
double dice_score(const Volume& mask_a, const Volume& mask_b);

/// Writes one 8-bit binary PGM per slice along `axis`, values min-max
/// scaled to 0..255 (all-128 when the volume is constant). When `mask` is
/// given, a companion <prefix>_mask_NNN.pgm binary channel is written per
/// slice. Returns the number of slice files written.
std::size_t export_slices(const Volume& volume, std::size_t axis,
                          const std::filesystem::path& path_prefix,
                          const Volume* mask = nullptr);

/// Reads back an exported PGM (test and inspection support).
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::size_t& width,
                                   std::size_t& height);

} // namespace volnet
