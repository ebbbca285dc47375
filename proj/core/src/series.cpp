#include "volnet/series.hpp"

namespace volnet {

const std::vector<std::size_t>& Series4D::frame_shape() const {
    if (frames.empty()) {
        throw DataError("series '" + subject_id + "' has no frames");
    }
    return frames.front().shape();
}

void Series4D::validate() const {
    if (label != 0 && label != 1) {
        throw DataError("series '" + subject_id + "' label outside {0,1}");
    }
    const auto& shape = frame_shape();
    if (shape.size() != 3) {
        throw ShapeError("series '" + subject_id + "' frames must be rank 3, got " +
                         Volume::shape_str(shape));
    }
    for (const Volume& f : frames) {
        if (f.shape() != shape) {
            throw ShapeError("series '" + subject_id + "' has frames of differing shapes");
        }
    }
}

std::size_t sliding_window_count(std::size_t t, std::size_t m, std::size_t s) {
    if (m < 1 || m > t) {
        throw DataError("window size " + std::to_string(m) + " invalid for series length " +
                        std::to_string(t));
    }
    if (s < 1) {
        throw DataError("window stride must be >= 1");
    }
    return (t - m) / s + 1;
}

std::vector<Sample3D> sliding_window_mean(const Series4D& series, std::size_t m, std::size_t s) {
    series.validate();
    const std::size_t t = series.frame_count();
    const std::size_t count = sliding_window_count(t, m, s);
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<Sample3D> samples;
    samples.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Volume acc(series.frame_shape());
        for (std::size_t j = 0; j < m; ++j) {
            const Volume& frame = series.frames[k * s + j];
            for (std::size_t v = 0; v < acc.size(); ++v) acc[v] += frame[v];
        }
        for (std::size_t v = 0; v < acc.size(); ++v) acc[v] *= inv_m;
        samples.push_back(Sample3D{series.subject_id, series.label, k, std::move(acc)});
    }
    return samples;
}

} // namespace volnet
