#include "volnet/vol4_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace volnet {

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'O', 'L', '4'};

// Scalar little-endian I/O. Byte-level so the format is host-order
// independent.

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T> && std::is_unsigned_v<T>);
    std::array<char, sizeof(T)> bytes;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in, const std::string& origin, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw DataError(origin + ": truncated while reading " + what);
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[i]) << (8 * i);
    }
    return value;
}

void write_f32(std::ostream& out, float value) {
    write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(value));
}

} // namespace

std::uint64_t vol4_payload_bytes(std::uint64_t t, std::uint64_t d, std::uint64_t h,
                                 std::uint64_t w) {
    constexpr std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t n = t;
    for (std::uint64_t dim : {d, h, w, std::uint64_t{4}}) {
        if (dim == 0 || n > limit / dim) {
            throw DataError("dimension overflow in volume header");
        }
        n *= dim;
    }
    return n;
}

void write_series(const Series4D& series, std::ostream& out) {
    series.validate();
    const auto& shape = series.frame_shape();
    if (series.subject_id.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw DataError("subject id too long for container");
    }
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint16_t>(out, kVol4Version);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(series.frame_count()));
    for (std::size_t axis = 0; axis < 3; ++axis) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape[axis]));
    }
    out.put(static_cast<char>(series.label));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(series.subject_id.size()));
    out.write(series.subject_id.data(), static_cast<std::streamsize>(series.subject_id.size()));
    for (const Volume& frame : series.frames) {
        for (double v : frame.values()) {
            write_f32(out, static_cast<float>(v));
        }
    }
    if (!out) {
        throw DataError("write failed for series '" + series.subject_id + "'");
    }
}

Series4D read_series(std::istream& in, const std::string& origin) {
    std::array<char, 4> magic;
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw DataError(origin + ": bad magic, not a VOL4 file");
    }
    const auto version = read_le<std::uint16_t>(in, origin, "version");
    if (version != kVol4Version) {
        throw DataError(origin + ": unsupported version " + std::to_string(version));
    }
    const auto t = read_le<std::uint32_t>(in, origin, "frame count");
    const auto d = read_le<std::uint32_t>(in, origin, "depth");
    const auto h = read_le<std::uint32_t>(in, origin, "height");
    const auto w = read_le<std::uint32_t>(in, origin, "width");
    if (t == 0) {
        throw DataError(origin + ": zero frames");
    }
    vol4_payload_bytes(t, d, h, w); // validates dims, rejects zero/overflow

    const auto label = read_le<std::uint8_t>(in, origin, "label");
    if (label > 1) {
        throw DataError(origin + ": label outside {0,1}");
    }
    const auto id_len = read_le<std::uint16_t>(in, origin, "id length");
    std::string id(id_len, '\0');
    if (id_len > 0 && !in.read(id.data(), id_len)) {
        throw DataError(origin + ": truncated while reading subject id");
    }

    Series4D series;
    series.subject_id = std::move(id);
    series.label = label;
    series.frames.reserve(t);
    const std::size_t frame_voxels = static_cast<std::size_t>(d) * h * w;
    std::vector<unsigned char> raw(frame_voxels * 4);
    for (std::uint32_t f = 0; f < t; ++f) {
        if (!in.read(reinterpret_cast<char*>(raw.data()),
                     static_cast<std::streamsize>(raw.size()))) {
            throw DataError(origin + ": truncated payload at frame " + std::to_string(f));
        }
        std::vector<double> data(frame_voxels);
        for (std::size_t v = 0; v < frame_voxels; ++v) {
            std::uint32_t bits = 0;
            for (std::size_t b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(raw[v * 4 + b]) << (8 * b);
            }
            const float x = std::bit_cast<float>(bits);
            if (!std::isfinite(x)) {
                throw DataError(origin + ": non-finite voxel in frame " + std::to_string(f));
            }
            data[v] = static_cast<double>(x);
        }
        series.frames.emplace_back(std::vector<std::size_t>{d, h, w}, std::move(data));
    }
    if (in.peek() != std::istream::traits_type::eof()) {
        throw DataError(origin + ": trailing bytes after payload");
    }
    return series;
}

void save_series(const Series4D& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open '" + path.string() + "' for writing");
    }
    write_series(series, out);
}

Series4D load_series(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return read_series(in, path.filename().string());
}

void save_single_volume(const Volume& volume, const std::string& id,
                        const std::filesystem::path& path) {
    if (volume.rank() != 3) {
        throw ShapeError("single-volume container expects rank 3, got " + volume.shape_str());
    }
    Series4D series;
    series.subject_id = id;
    series.label = 0;
    series.frames.push_back(volume);
    save_series(series, path);
}

Volume load_single_volume(const std::filesystem::path& path) {
    Series4D series = load_series(path);
    if (series.frame_count() != 1) {
        throw DataError("'" + path.string() + "' holds " + std::to_string(series.frame_count()) +
                        " frames, expected a single volume");
    }
    return std::move(series.frames.front());
}

} // namespace volnet
