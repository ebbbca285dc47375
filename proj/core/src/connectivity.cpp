#include "volnet/connectivity.hpp"

#include <cmath>

namespace volnet {

void Parcellation::validate() const {
    if (labels.rank() != 3) {
        throw ShapeError("parcellation must be rank 3, got " + labels.shape_str());
    }
    if (region_count == 0) {
        throw DataError("parcellation must define at least one region");
    }
    std::vector<std::size_t> voxels_per_region(region_count + 1, 0);
    for (double v : labels.values()) {
        if (v != std::floor(v) || v < 0.0 || v > static_cast<double>(region_count)) {
            throw DataError("parcellation voxel label " + std::to_string(v) +
                            " outside 0.." + std::to_string(region_count));
        }
        ++voxels_per_region[static_cast<std::size_t>(v)];
    }
    for (std::size_t r = 1; r <= region_count; ++r) {
        if (voxels_per_region[r] == 0) {
            throw DataError("parcellation region " + std::to_string(r) + " is empty");
        }
    }
}

Volume region_time_series(const Series4D& series, const Parcellation& parc) {
    series.validate();
    parc.validate();
    if (series.frame_shape() != parc.labels.shape()) {
        throw ShapeError("parcellation shape " + parc.labels.shape_str() +
                         " differs from frame shape " +
                         Volume::shape_str(series.frame_shape()));
    }
    const std::size_t r_count = parc.region_count;
    const std::size_t t_count = series.frame_count();

    std::vector<std::vector<std::size_t>> voxels_of(r_count);
    for (std::size_t v = 0; v < parc.labels.size(); ++v) {
        const auto label = static_cast<std::size_t>(parc.labels[v]);
        if (label > 0) voxels_of[label - 1].push_back(v);
    }

    Volume out({r_count, t_count});
    for (std::size_t r = 0; r < r_count; ++r) {
        const double inv = 1.0 / static_cast<double>(voxels_of[r].size());
        for (std::size_t t = 0; t < t_count; ++t) {
            const Volume& frame = series.frames[t];
            double sum = 0.0;
            for (std::size_t v : voxels_of[r]) sum += frame[v];
            out[r * t_count + t] = sum * inv;
        }
    }
    return out;
}

bool ConnectivityMatrix::any_degenerate() const {
    for (bool f : degenerate_row) {
        if (f) return true;
    }
    return false;
}

std::vector<double> ConnectivityMatrix::upper_triangle() const {
    const std::size_t r = z.dim(0);
    std::vector<double> out;
    out.reserve(r * (r - 1) / 2);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = i + 1; j < r; ++j) {
            out.push_back(z[i * r + j]);
        }
    }
    return out;
}

ConnectivityMatrix fisher_z(const Volume& region_series) {
    if (region_series.rank() != 2) {
        throw ShapeError("fisher_z expects a rank-2 [R,T] matrix, got " +
                         region_series.shape_str());
    }
    const std::size_t r_count = region_series.dim(0);
    const std::size_t t_count = region_series.dim(1);
    if (t_count < 3) {
        throw DataError("fisher_z needs at least 3 time points, got " +
                        std::to_string(t_count));
    }

    // Center rows once; degenerate (constant) rows are flagged and excluded.
    std::vector<double> centered(r_count * t_count);
    std::vector<double> norms(r_count);
    std::vector<bool> degenerate(r_count, false);
    for (std::size_t i = 0; i < r_count; ++i) {
        const double* row = region_series.data() + i * t_count;
        double mean = 0.0;
        for (std::size_t t = 0; t < t_count; ++t) mean += row[t];
        mean /= static_cast<double>(t_count);
        double sq = 0.0;
        for (std::size_t t = 0; t < t_count; ++t) {
            const double c = row[t] - mean;
            centered[i * t_count + t] = c;
            sq += c * c;
        }
        norms[i] = std::sqrt(sq);
        degenerate[i] = norms[i] == 0.0;
    }

    ConnectivityMatrix cm;
    cm.z = Volume({r_count, r_count});
    cm.degenerate_row = degenerate;
    for (std::size_t i = 0; i < r_count; ++i) {
        for (std::size_t j = i + 1; j < r_count; ++j) {
            double zij = 0.0;
            if (!degenerate[i] && !degenerate[j]) {
                double dot = 0.0;
                const double* a = centered.data() + i * t_count;
                const double* b = centered.data() + j * t_count;
                for (std::size_t t = 0; t < t_count; ++t) dot += a[t] * b[t];
                double corr = dot / (norms[i] * norms[j]);
                corr = std::clamp(corr, -kCorrelationClamp, kCorrelationClamp);
                zij = std::atanh(corr);
            }
            cm.z[i * r_count + j] = zij;
            cm.z[j * r_count + i] = zij;
        }
    }
    return cm;
}

} // namespace volnet
