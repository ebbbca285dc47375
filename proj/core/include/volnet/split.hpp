#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "volnet/error.hpp"

namespace volnet {

enum class Split { train = 0, val = 1, test = 2 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

/// Subject-level split assignment with the seed that produced it. Within
/// each label class the subject counts match the ratios to within one
/// subject (largest-remainder rounding).
struct SplitManifest {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    std::map<std::string, Split> assignment;

    std::vector<std::string> subjects_in(Split s) const;
    Split split_of(const std::string& subject_id) const;
};

/// Shuffles each label class with the seeded generator and partitions it by
/// the ratios. Deterministic given the seed. Requires at least one subject
/// per class per split after rounding.
SplitManifest stratified_subject_split(const std::vector<std::pair<std::string, int>>& subjects,
                                       const std::array<double, 3>& ratios, std::uint64_t seed);

/// Largest-remainder apportionment of n into the ratio buckets; remainder
/// ties go to the later bucket so test fills before val.
std::array<std::size_t, 3> apportion_counts(std::size_t n, const std::array<double, 3>& ratios);

// Textual table: a "#seed=<n>" comment line then one
// "subject_id,label,split" line per subject.
void save_manifest(const SplitManifest& manifest,
                   const std::vector<std::pair<std::string, int>>& subjects,
                   const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path,
                            std::vector<std::pair<std::string, int>>* subjects_out = nullptr);

} // namespace volnet
