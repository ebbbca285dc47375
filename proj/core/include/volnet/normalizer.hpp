#pragma once

#include <span>

#include "volnet/series.hpp"

namespace volnet {

/// Training-set intensity normalization: subtract the voxelwise mean image,
/// then divide by the largest absolute deviation from it. Both statistics
/// come from training samples only; the same transform is applied verbatim
/// to validation and test data, whose outputs may leave [-1, 1].
struct Normalizer {
    Volume mean_image;
    double max_abs = 0.0;

    Volume apply(const Volume& voxels) const;
    Sample3D apply(const Sample3D& sample) const;

    /// Inverse transform; apply(invert(x)) == x up to rounding.
    Volume invert(const Volume& normalized) const;
};

Normalizer fit_normalizer(std::span<const Sample3D> train_samples);

} // namespace volnet
