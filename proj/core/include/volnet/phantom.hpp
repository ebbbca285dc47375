#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "volnet/series.hpp"

namespace volnet {

/// Spherical signal site with one amplitude per group.
struct SignalRegion {
    std::array<double, 3> center{0, 0, 0};
    double radius = 0.0;
    double amp_young = 0.0;
    double amp_old = 0.0;
};

/// Synthetic cohort description. Each subject's frames are Gaussian noise
/// plus, per region, the group amplitude modulated by a subject-specific
/// slow sinusoidal envelope (strictly positive, so zero amplitude means a
/// zero contribution everywhere).
struct PhantomSpec {
    std::size_t n_young = 0;
    std::size_t n_old = 0;
    std::size_t frames = 0;
    std::array<std::size_t, 3> dims{43, 51, 40};
    std::vector<SignalRegion> regions;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;

    /// True when some region separates the groups. Not enforced: a cohort
    /// with equal amplitudes is the null-signal control.
    bool has_planted_signal() const;
};

struct PhantomCohort {
    std::vector<Series4D> subjects;
    std::vector<Volume> region_masks; // one binary [D,H,W] mask per region
};

/// Deterministic given spec.seed; per-subject noise streams are derived
/// from (seed, subject index) so the cohort is independent of generation
/// order.
PhantomCohort generate_phantom_cohort(const PhantomSpec& spec);

} // namespace volnet
