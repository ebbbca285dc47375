#include "volnet/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "volnet/rng.hpp"

namespace volnet {

namespace {

constexpr double kEnvelopeFreq = 0.03; // cycles per frame
constexpr double kEnvelopeDepth = 0.5;

std::string subject_name(int label, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu", label == 0 ? "young" : "old", index);
    return buf;
}

} // namespace

void PhantomSpec::validate() const {
    if (n_young + n_old == 0) {
        throw DataError("phantom cohort must have at least one subject");
    }
    if (frames == 0) {
        throw DataError("phantom subjects need at least one frame");
    }
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
        throw DataError("phantom volume dimensions must be positive");
    }
    if (noise_sigma < 0.0) {
        throw DataError("noise_sigma must be non-negative");
    }
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const SignalRegion& region = regions[r];
        if (region.radius <= 0.0) {
            throw DataError("region " + std::to_string(r) + " has non-positive radius");
        }
        for (std::size_t axis = 0; axis < 3; ++axis) {
            if (region.center[axis] - region.radius < 0.0 ||
                region.center[axis] + region.radius > static_cast<double>(dims[axis] - 1)) {
                throw DataError("region " + std::to_string(r) + " sphere leaves volume bounds");
            }
        }
    }
}

bool PhantomSpec::has_planted_signal() const {
    for (const SignalRegion& region : regions) {
        if (region.amp_young != region.amp_old) return true;
    }
    return false;
}

PhantomCohort generate_phantom_cohort(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t d = spec.dims[0], h = spec.dims[1], w = spec.dims[2];

    PhantomCohort cohort;
    cohort.region_masks.reserve(spec.regions.size());
    for (const SignalRegion& region : spec.regions) {
        Volume mask({d, h, w});
        for (std::size_t z = 0; z < d; ++z) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double dz = static_cast<double>(z) - region.center[0];
                    const double dy = static_cast<double>(y) - region.center[1];
                    const double dx = static_cast<double>(x) - region.center[2];
                    if (dz * dz + dy * dy + dx * dx <= region.radius * region.radius) {
                        mask[(z * h + y) * w + x] = 1.0;
                    }
                }
            }
        }
        cohort.region_masks.push_back(std::move(mask));
    }

    const std::size_t total = spec.n_young + spec.n_old;
    cohort.subjects.reserve(total);
    for (std::size_t s = 0; s < total; ++s) {
        const int label = s < spec.n_young ? 0 : 1;
        const std::size_t class_index = label == 0 ? s : s - spec.n_young;
        Rng rng(mix_seed(spec.seed, s));

        std::vector<double> phase(spec.regions.size());
        for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

        Series4D series;
        series.subject_id = subject_name(label, class_index);
        series.label = label;
        series.frames.reserve(spec.frames);
        for (std::size_t t = 0; t < spec.frames; ++t) {
            Volume frame({d, h, w});
            if (spec.noise_sigma > 0.0) {
                for (std::size_t v = 0; v < frame.size(); ++v) {
                    frame[v] = rng.gaussian(0.0, spec.noise_sigma);
                }
            }
            for (std::size_t r = 0; r < spec.regions.size(); ++r) {
                const SignalRegion& region = spec.regions[r];
                const double amp = label == 0 ? region.amp_young : region.amp_old;
                if (amp == 0.0) continue;
                const double envelope =
                    1.0 + kEnvelopeDepth *
                              std::sin(2.0 * std::numbers::pi * kEnvelopeFreq *
                                           static_cast<double>(t) +
                                       phase[r]);
                const double value = amp * envelope;
                const Volume& mask = cohort.region_masks[r];
                for (std::size_t v = 0; v < frame.size(); ++v) {
                    if (mask[v] != 0.0) frame[v] += value;
                }
            }
            series.frames.push_back(std::move(frame));
        }
        cohort.subjects.push_back(std::move(series));
    }
    return cohort;
}

} // namespace volnet
