#include "volnet/normalizer.hpp"

#include <cmath>

namespace volnet {

Normalizer fit_normalizer(std::span<const Sample3D> train_samples) {
    if (train_samples.empty()) {
        throw DataError("cannot fit normalizer on an empty training set");
    }
    const Volume& first = train_samples.front().voxels;
    Volume mean(first.shape());
    for (const Sample3D& s : train_samples) {
        if (!s.voxels.same_shape(mean)) {
            throw ShapeError("training sample shape " + s.voxels.shape_str() +
                             " differs from " + mean.shape_str());
        }
        for (std::size_t v = 0; v < mean.size(); ++v) mean[v] += s.voxels[v];
    }
    const double inv_n = 1.0 / static_cast<double>(train_samples.size());
    for (std::size_t v = 0; v < mean.size(); ++v) mean[v] *= inv_n;

    double max_abs = 0.0;
    for (const Sample3D& s : train_samples) {
        for (std::size_t v = 0; v < mean.size(); ++v) {
            max_abs = std::max(max_abs, std::abs(s.voxels[v] - mean[v]));
        }
    }
    if (max_abs == 0.0) {
        throw DataError("degenerate training data: every sample equals the mean image, "
                        "max_abs would be 0");
    }
    return Normalizer{std::move(mean), max_abs};
}

Volume Normalizer::apply(const Volume& voxels) const {
    if (!voxels.same_shape(mean_image)) {
        throw ShapeError("normalizer shape " + mean_image.shape_str() + " vs sample " +
                         voxels.shape_str());
    }
    Volume out(voxels.shape());
    const double inv = 1.0 / max_abs;
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = (voxels[v] - mean_image[v]) * inv;
    }
    return out;
}

Sample3D Normalizer::apply(const Sample3D& sample) const {
    return Sample3D{sample.subject_id, sample.label, sample.window_index, apply(sample.voxels)};
}

Volume Normalizer::invert(const Volume& normalized) const {
    if (!normalized.same_shape(mean_image)) {
        throw ShapeError("normalizer shape " + mean_image.shape_str() + " vs input " +
                         normalized.shape_str());
    }
    Volume out(normalized.shape());
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = normalized[v] * max_abs + mean_image[v];
    }
    return out;
}

} // namespace volnet
