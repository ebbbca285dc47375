#include "volnet/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "volnet/rng.hpp"

namespace volnet {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw DataError("unknown split name '" + name + "'");
}

std::vector<std::string> SplitManifest::subjects_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, sp] : assignment) {
        if (sp == s) out.push_back(id);
    }
    return out;
}

Split SplitManifest::split_of(const std::string& subject_id) const {
    auto it = assignment.find(subject_id);
    if (it == assignment.end()) {
        throw DataError("subject '" + subject_id + "' missing from split manifest");
    }
    return it->second;
}

std::array<std::size_t, 3> apportion_counts(std::size_t n, const std::array<double, 3>& ratios) {
    // Integer largest-remainder on parts-per-million quotas. Floating-point
    // remainders are not reproducible across builds (FMA contraction can
    // perturb n*ratio - floor(n*ratio)), and split counts must be.
    std::array<std::uint64_t, 3> ppm{};
    std::uint64_t ppm_sum = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) {
            throw DataError("split ratios must lie in [0, 1]");
        }
        ppm[i] = static_cast<std::uint64_t>(std::llround(ratios[i] * 1e6));
        ppm_sum += ppm[i];
    }
    if (ppm_sum != 1000000) {
        throw DataError("split ratios must sum to 1");
    }

    std::array<std::size_t, 3> counts{};
    std::array<std::uint64_t, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::uint64_t quota = static_cast<std::uint64_t>(n) * ppm[i];
        counts[i] = static_cast<std::size_t>(quota / 1000000);
        remainders[i] = quota % 1000000;
        assigned += counts[i];
    }
    // Hand out leftover seats by descending remainder, later bucket first on
    // ties (test before val before train).
    std::array<std::size_t, 3> order{2, 1, 0};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    std::size_t leftover = n - assigned;
    for (std::size_t i = 0; i < 3 && leftover > 0; ++i, --leftover) {
        ++counts[order[i]];
    }
    return counts;
}

SplitManifest stratified_subject_split(const std::vector<std::pair<std::string, int>>& subjects,
                                       const std::array<double, 3>& ratios, std::uint64_t seed) {
    std::array<std::vector<std::string>, 2> by_class;
    for (const auto& [id, label] : subjects) {
        if (label != 0 && label != 1) {
            throw DataError("subject '" + id + "' label outside {0,1}");
        }
        by_class[static_cast<std::size_t>(label)].push_back(id);
    }

    SplitManifest manifest;
    manifest.seed = seed;
    manifest.ratios = ratios;

    Rng rng(seed);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        auto& ids = by_class[cls];
        const auto counts = apportion_counts(ids.size(), ratios);
        for (std::size_t i = 0; i < 3; ++i) {
            if (counts[i] == 0) {
                throw DataError("too few subjects: class " + std::to_string(cls) + " has " +
                                std::to_string(ids.size()) + ", leaving split '" +
                                split_name(static_cast<Split>(i)) + "' empty");
            }
        }
        rng.shuffle(ids);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < counts[i]; ++j, ++pos) {
                auto [it, inserted] =
                    manifest.assignment.emplace(ids[pos], static_cast<Split>(i));
                if (!inserted) {
                    throw DataError("duplicate subject id '" + ids[pos] + "'");
                }
            }
        }
    }
    return manifest;
}

void save_manifest(const SplitManifest& manifest,
                   const std::vector<std::pair<std::string, int>>& subjects,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    out << "#seed=" << manifest.seed << "\n";
    for (const auto& [id, label] : subjects) {
        out << id << "," << label << "," << split_name(manifest.split_of(id)) << "\n";
    }
    if (!out) {
        throw DataError("write failed for '" + path.string() + "'");
    }
}

SplitManifest load_manifest(const std::filesystem::path& path,
                            std::vector<std::pair<std::string, int>>* subjects_out) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    SplitManifest manifest;
    bool saw_seed = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#seed=", 0) == 0) {
                manifest.seed = std::stoull(line.substr(6));
                saw_seed = true;
            }
            continue;
        }
        std::istringstream row(line);
        std::string id, label_str, split_str;
        if (!std::getline(row, id, ',') || !std::getline(row, label_str, ',') ||
            !std::getline(row, split_str)) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'subject_id,label,split'");
        }
        const int label = std::stoi(label_str);
        if (label != 0 && label != 1) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": label outside {0,1}");
        }
        if (!manifest.assignment.emplace(id, split_from_name(split_str)).second) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate subject '" + id + "'");
        }
        if (subjects_out) subjects_out->emplace_back(id, label);
    }
    if (!saw_seed) {
        throw DataError(path.string() + ": missing #seed= header line");
    }
    return manifest;
}

} // namespace volnet
