#include "volnet/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace volnet {

SensitivityMap sensitivity_map(const CnnConfig& config, CnnParams& params,
                               const Sample3D& normalized_sample, int target_group) {
    if (target_group != 0 && target_group != 1) {
        throw DataError("target group outside {0,1}");
    }
    Tape tape;
    const Tape::NodeId input = tape.leaf(as_network_input(normalized_sample.voxels));
    const Tape::NodeId prob = network_forward(tape, input, params, config);

    // d f_target / d p: f_1 = p, f_0 = 1 - p.
    const double seed = target_group == 1 ? 1.0 : -1.0;
    tape.backward(prob, seed);

    const Volume& grad = tape.grad(input);
    Volume map(normalized_sample.voxels.shape());
    for (std::size_t v = 0; v < map.size(); ++v) {
        map[v] = grad[v] * grad[v];
    }
    return SensitivityMap{std::move(map), normalized_sample.subject_id,
                          normalized_sample.window_index, target_group};
}

namespace {

// Pairwise-summed voxelwise total over maps[begin, end).
void pairwise_sum(std::span<const SensitivityMap> maps, std::size_t begin, std::size_t end,
                  Volume& out) {
    if (end - begin == 1) {
        const Volume& m = maps[begin].voxels;
        for (std::size_t v = 0; v < out.size(); ++v) out[v] = m[v];
        return;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    Volume right(out.shape());
    pairwise_sum(maps, begin, mid, out);
    pairwise_sum(maps, mid, end, right);
    for (std::size_t v = 0; v < out.size(); ++v) out[v] += right[v];
}

} // namespace

GroupSensitivity aggregate_group(std::span<const SensitivityMap> maps, int group) {
    if (maps.empty()) {
        throw DataError("cannot aggregate an empty list of sensitivity maps");
    }
    const Volume& first = maps.front().voxels;
    for (const SensitivityMap& m : maps) {
        if (!m.voxels.same_shape(first)) {
            throw ShapeError("sensitivity map shapes differ: " + m.voxels.shape_str() + " vs " +
                             first.shape_str());
        }
    }
    GroupSensitivity gs;
    gs.group = group;
    gs.n_samples = maps.size();
    gs.mean_map = Volume(first.shape());
    pairwise_sum(maps, 0, maps.size(), gs.mean_map);
    const double inv_n = 1.0 / static_cast<double>(maps.size());
    for (std::size_t v = 0; v < gs.mean_map.size(); ++v) gs.mean_map[v] *= inv_n;
    return gs;
}

GroupSensitivity aggregate_group_per_subject(std::span<const SensitivityMap> maps, int group) {
    if (maps.empty()) {
        throw DataError("cannot aggregate an empty list of sensitivity maps");
    }
    // Subjects keep first-appearance order; each contributes one mean map.
    std::vector<std::string> order;
    std::map<std::string, std::vector<SensitivityMap>> by_subject;
    for (const SensitivityMap& m : maps) {
        if (by_subject.emplace(m.subject_id, std::vector<SensitivityMap>{}).second) {
            order.push_back(m.subject_id);
        }
        by_subject[m.subject_id].push_back(m);
    }
    std::vector<SensitivityMap> subject_means;
    subject_means.reserve(order.size());
    for (const std::string& id : order) {
        GroupSensitivity per = aggregate_group(by_subject[id], group);
        subject_means.push_back(SensitivityMap{std::move(per.mean_map), id, 0, group});
    }
    GroupSensitivity gs = aggregate_group(subject_means, group);
    gs.n_samples = maps.size();
    return gs;
}

double percentile_value(const Volume& volume, double percentile) {
    if (!(percentile > 0.0 && percentile < 100.0)) {
        throw DataError("percentile must lie in (0, 100)");
    }
    std::vector<double> sorted(volume.values().begin(), volume.values().end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * percentile / 100.0;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    const double frac = h - std::floor(h);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Volume threshold_regions(GroupSensitivity& group_sens, double percentile) {
    const double p = percentile_value(group_sens.mean_map, percentile);
    Volume mask(group_sens.mean_map.shape());
    for (std::size_t v = 0; v < mask.size(); ++v) {
        mask[v] = group_sens.mean_map[v] >= p ? 1.0 : 0.0;
    }
    group_sens.threshold_percentile = percentile;
    group_sens.threshold_value = p;
    group_sens.region_mask = mask;
    return mask;
}

double dice_score(const Volume& mask_a, const Volume& mask_b) {
    if (!mask_a.same_shape(mask_b)) {
        throw ShapeError("dice masks differ in shape: " + mask_a.shape_str() + " vs " +
                         mask_b.shape_str());
    }
    std::size_t a = 0, b = 0, both = 0;
    for (std::size_t v = 0; v < mask_a.size(); ++v) {
        const bool in_a = mask_a[v] != 0.0;
        const bool in_b = mask_b[v] != 0.0;
        a += in_a;
        b += in_b;
        both += in_a && in_b;
    }
    if (a + b == 0) return 0.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

namespace {

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
               std::size_t width, std::size_t height) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

} // namespace

std::size_t export_slices(const Volume& volume, std::size_t axis,
                          const std::filesystem::path& path_prefix, const Volume* mask) {
    if (volume.rank() != 3) {
        throw ShapeError("slice export expects a rank-3 volume, got " + volume.shape_str());
    }
    if (axis > 2) {
        throw DataError("slice axis must be 0, 1 or 2");
    }
    if (mask && !mask->same_shape(volume)) {
        throw ShapeError("overlay mask shape " + mask->shape_str() + " differs from volume " +
                         volume.shape_str());
    }

    double lo = volume[0], hi = volume[0];
    for (double v : volume.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const bool constant = hi == lo;
    const double scale = constant ? 0.0 : 255.0 / (hi - lo);

    const std::size_t dims[3] = {volume.dim(0), volume.dim(1), volume.dim(2)};
    const std::size_t n_slices = dims[axis];
    const std::size_t row_axis = axis == 0 ? 1 : 0;
    const std::size_t col_axis = axis == 2 ? 1 : 2;
    const std::size_t height = dims[row_axis];
    const std::size_t width = dims[col_axis];

    auto voxel_at = [&](const Volume& vol, std::size_t slice, std::size_t r, std::size_t c) {
        std::size_t idx[3];
        idx[axis] = slice;
        idx[row_axis] = r;
        idx[col_axis] = c;
        return vol[(idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]];
    };

    for (std::size_t s = 0; s < n_slices; ++s) {
        std::vector<std::uint8_t> pixels(width * height);
        std::vector<std::uint8_t> overlay(mask ? width * height : 0);
        for (std::size_t r = 0; r < height; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                const double v = voxel_at(volume, s, r, c);
                pixels[r * width + c] =
                    constant ? 128
                             : static_cast<std::uint8_t>(std::lround((v - lo) * scale));
                if (mask) {
                    overlay[r * width + c] = voxel_at(*mask, s, r, c) != 0.0 ? 255 : 0;
                }
            }
        }
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "_%03zu.pgm", s);
        write_pgm(path_prefix.string() + suffix, pixels, width, height);
        if (mask) {
            std::snprintf(suffix, sizeof(suffix), "_mask_%03zu.pgm", s);
            write_pgm(path_prefix.string() + suffix, overlay, width, height);
        }
    }
    return n_slices;
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::size_t& width,
                                   std::size_t& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::string magic;
    std::size_t maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 255) {
        throw DataError("'" + path.string() + "' is not an 8-bit binary PGM");
    }
    in.get(); // the single whitespace after the header
    std::vector<std::uint8_t> pixels(width * height);
    if (!in.read(reinterpret_cast<char*>(pixels.data()),
                 static_cast<std::streamsize>(pixels.size()))) {
        throw DataError("'" + path.string() + "' truncated");
    }
    return pixels;
}

} // namespace volnet
