#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "volnet/volume.hpp"

namespace volnet {

/// One subject's residual BOLD run: T ordered frames of identical [D,H,W]
/// shape plus the subject's id and binary group label (0 younger, 1 older).
struct Series4D {
    std::string subject_id;
    int label = 0;
    std::vector<Volume> frames;

    std::size_t frame_count() const { return frames.size(); }
    const std::vector<std::size_t>& frame_shape() const;

    /// Checks the label domain and that all frames share one rank-3 shape.
    void validate() const;
};

/// A windowed-mean 3D volume; the classifier's training unit.
struct Sample3D {
    std::string subject_id;
    int label = 0;
    std::size_t window_index = 0;
    Volume voxels;
};

/// Temporal mean over windows of m frames advancing by stride s. Produces
/// exactly floor((T-m)/s)+1 samples; sample k averages frames [k*s, k*s+m).
std::vector<Sample3D> sliding_window_mean(const Series4D& series, std::size_t m, std::size_t s);

/// Number of windows the extraction yields for the given series length.
std::size_t sliding_window_count(std::size_t t, std::size_t m, std::size_t s);

} // namespace volnet
