#pragma once

#include <vector>

#include "volnet/series.hpp"

namespace volnet {

/// Voxel labeling into regions 1..R, 0 = background. Stored as an
/// integer-valued rank-3 volume.
struct Parcellation {
    Volume labels;
    std::size_t region_count = 0;

    /// Checks ids are integers in 0..R and every region 1..R is non-empty.
    void validate() const;
};

/// Region-mean time series: row r, column t = mean over frame t's voxels
/// with label r+1. Result is rank 2 [R, T].
Volume region_time_series(const Series4D& series, const Parcellation& parc);

/// Symmetric matrix of Fisher-transformed Pearson correlations between
/// region time series, zero diagonal. Correlations are clamped to
/// +/-(1 - 1e-7) before atanh; zero-variance rows give z = 0 and a flag.
struct ConnectivityMatrix {
    Volume z; // [R, R], symmetric, zero diagonal, finite
    std::vector<bool> degenerate_row;

    bool any_degenerate() const;

    /// Upper triangle (i < j) flattened row-major: R(R-1)/2 features.
    std::vector<double> upper_triangle() const;
};

inline constexpr double kCorrelationClamp = 1.0 - 1e-7;

ConnectivityMatrix fisher_z(const Volume& region_series);

} // namespace volnet
