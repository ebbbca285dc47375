#pragma once

#include <filesystem>
#include <iosfwd>

#include "volnet/series.hpp"

namespace volnet {

// Volume series container. Layout:
//   magic "VOL4" | u16 version | u32 T, D, H, W | u8 label |
//   u16 id length | UTF-8 id | T*D*H*W little-endian f32, row-major,
//   frame-major.
// Voxels are stored as f32 and promoted to f64 in memory.

inline constexpr std::uint16_t kVol4Version = 1;

void save_series(const Series4D& series, const std::filesystem::path& path);
Series4D load_series(const std::filesystem::path& path);

void write_series(const Series4D& series, std::ostream& out);
Series4D read_series(std::istream& in, const std::string& origin);

/// Payload byte count implied by a header; what the parser validates the
/// remaining file length against.
std::uint64_t vol4_payload_bytes(std::uint64_t t, std::uint64_t d, std::uint64_t h,
                                 std::uint64_t w);

/// Stores a single volume (mask, mean map, parcellation) as a one-frame
/// series with the given id.
void save_single_volume(const Volume& volume, const std::string& id,
                        const std::filesystem::path& path);
Volume load_single_volume(const std::filesystem::path& path);

} // namespace volnet
