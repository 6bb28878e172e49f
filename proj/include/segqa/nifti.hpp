#ifndef SEGQA_NIFTI_HPP
#define SEGQA_NIFTI_HPP

// Single-file NIfTI-1 ("n+1") reader and writer for scalar volumes, label
// maps and 3-component displacement fields. Files ending in ".gz" are read
// and written through zlib.

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "segqa/error.hpp"
#include "segqa/grid.hpp"

namespace segqa {

class NiftiError : public FormatError {
  public:
    enum class Kind {
        truncated_header,
        bad_header_size,
        bad_magic,
        unsupported_format,  // two-file "ni1" form
        unsupported_datatype,
        bad_dimensions,
        truncated_data,
        bad_scaling,
        invalid_label,
    };

    NiftiError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

namespace nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kDataOffset = 352;

// Byte offsets within the 348-byte header.
inline constexpr std::size_t kOffSizeofHdr = 0;
inline constexpr std::size_t kOffDim = 40;
inline constexpr std::size_t kOffIntentCode = 68;
inline constexpr std::size_t kOffDatatype = 70;
inline constexpr std::size_t kOffBitpix = 72;
inline constexpr std::size_t kOffPixdim = 76;
inline constexpr std::size_t kOffVoxOffset = 108;
inline constexpr std::size_t kOffSclSlope = 112;
inline constexpr std::size_t kOffSclInter = 116;
inline constexpr std::size_t kOffXyztUnits = 123;
inline constexpr std::size_t kOffQformCode = 252;
inline constexpr std::size_t kOffSformCode = 254;
inline constexpr std::size_t kOffSrowX = 280;
inline constexpr std::size_t kOffMagic = 344;

enum Datatype : std::int16_t { dt_uint8 = 2, dt_int16 = 4, dt_int32 = 8, dt_float32 = 16, dt_float64 = 64 };

inline constexpr std::int16_t kIntentVector = 1007;

inline int bytes_per_value(std::int16_t datatype) {
    switch (datatype) {
        case dt_uint8: return 1;
        case dt_int16: return 2;
        case dt_int32: return 4;
        case dt_float32: return 4;
        case dt_float64: return 8;
        default: return 0;
    }
}

inline bool is_integer_datatype(std::int16_t datatype) {
    return datatype == dt_uint8 || datatype == dt_int16 || datatype == dt_int32;
}

inline bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
    std::vector<unsigned char> bytes;
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.string().c_str(), "rb");
        if (gz == nullptr) throw IoError("cannot open " + path.string());
        unsigned char chunk[1 << 16];
        int n = 0;
        while ((n = gzread(gz, chunk, sizeof(chunk))) > 0) bytes.insert(bytes.end(), chunk, chunk + n);
        const bool failed = n < 0;
        gzclose(gz);
        if (failed) throw IoError("gzip stream error in " + path.string());
        return bytes;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    bytes.resize(static_cast<std::size_t>(std::filesystem::file_size(path)));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError("read failure on " + path.string());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    if (has_gz_suffix(path)) {
        gzFile gz = gzopen(path.string().c_str(), "wb6");
        if (gz == nullptr) throw IoError("cannot create " + path.string());
        const bool ok = bytes.empty() || gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size())) ==
                                             static_cast<int>(bytes.size());
        if (gzclose(gz) != Z_OK || !ok) throw IoError("gzip write failure on " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

inline constexpr std::uint32_t swap_bytes32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}

// Reads fixed-width values from a byte buffer, optionally reversing byte order.
class ByteReader {
  public:
    ByteReader(const std::vector<unsigned char>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw, raw + sizeof(T));
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

  private:
    const std::vector<unsigned char>& bytes_;
    bool swap_;
};

template <typename T>
void put(std::vector<unsigned char>& bytes, std::size_t offset, T value) {
    std::memcpy(bytes.data() + offset, &value, sizeof(T));
}

// Parsed header fields the reader cares about.
struct Header {
    bool swapped = false;
    std::array<std::int16_t, 8> dim{};
    std::int16_t datatype = 0;
    std::int16_t bitpix = 0;
    std::int16_t intent_code = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = 0.0f;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;

    int components() const { return dim[0] >= 5 ? dim[5] : 1; }
};

// Decoded file: header plus all voxel values as doubles, component-slowest
// (all x component values, then all y, then all z) as stored on disk.
struct RawImage {
    Header header;
    GridShape shape;
    std::vector<double> values;
};

inline Header parse_header(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < kHeaderSize) {
        throw NiftiError(NiftiError::Kind::truncated_header, "file shorter than the 348-byte NIfTI-1 header");
    }
    Header h;
    {
        ByteReader native(bytes, false);
        const auto size = native.get<std::int32_t>(kOffSizeofHdr);
        if (size == static_cast<std::int32_t>(kHeaderSize)) {
            h.swapped = false;
        } else if (swap_bytes32(static_cast<std::uint32_t>(size)) == kHeaderSize) {
            h.swapped = true;
        } else {
            throw NiftiError(NiftiError::Kind::bad_header_size, "sizeof_hdr is neither 348 nor byte-swapped 348");
        }
    }
    if (std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) == 0) {
        throw NiftiError(NiftiError::Kind::unsupported_format, "two-file NIfTI-1 (ni1) is not supported");
    }
    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
        throw NiftiError(NiftiError::Kind::bad_magic, "missing NIfTI-1 magic 'n+1'");
    }
    ByteReader rd(bytes, h.swapped);
    for (std::size_t d = 0; d < 8; ++d) h.dim[d] = rd.get<std::int16_t>(kOffDim + 2 * d);
    h.intent_code = rd.get<std::int16_t>(kOffIntentCode);
    h.datatype = rd.get<std::int16_t>(kOffDatatype);
    h.bitpix = rd.get<std::int16_t>(kOffBitpix);
    for (std::size_t d = 0; d < 8; ++d) h.pixdim[d] = rd.get<float>(kOffPixdim + 4 * d);
    h.vox_offset = rd.get<float>(kOffVoxOffset);
    h.scl_slope = rd.get<float>(kOffSclSlope);
    h.scl_inter = rd.get<float>(kOffSclInter);

    if (bytes_per_value(h.datatype) == 0) {
        throw NiftiError(NiftiError::Kind::unsupported_datatype,
                         "unsupported NIfTI datatype code " + std::to_string(h.datatype));
    }
    if (h.bitpix != 8 * bytes_per_value(h.datatype)) {
        throw NiftiError(NiftiError::Kind::unsupported_datatype, "bitpix does not match datatype");
    }
    const int ndim = h.dim[0];
    if (ndim < 3 || ndim > 5) {
        throw NiftiError(NiftiError::Kind::bad_dimensions, "dim[0] must be 3, 4 or 5, got " + std::to_string(ndim));
    }
    for (int d = 1; d <= 3; ++d) {
        if (h.dim[d] < 1) throw NiftiError(NiftiError::Kind::bad_dimensions, "spatial dimension < 1");
    }
    if (ndim >= 4 && h.dim[4] != 1) {
        throw NiftiError(NiftiError::Kind::bad_dimensions, "time series (dim[4] > 1) are not supported");
    }
    if (ndim == 5 && h.dim[5] != 1 && h.dim[5] != 3) {
        throw NiftiError(NiftiError::Kind::bad_dimensions,
                         "dim[5] must be 1 or 3, got " + std::to_string(h.dim[5]));
    }
    for (int d = 1; d <= 3; ++d) {
        if (!(std::abs(h.pixdim[d]) > 0.0f) || !std::isfinite(h.pixdim[d])) {
            throw NiftiError(NiftiError::Kind::bad_dimensions, "pixdim must be finite and non-zero");
        }
    }
    if (!std::isfinite(h.vox_offset) || h.vox_offset < static_cast<float>(kHeaderSize)) {
        throw NiftiError(NiftiError::Kind::truncated_data, "vox_offset points inside the header");
    }
    return h;
}

inline RawImage decode(const std::vector<unsigned char>& bytes) {
    RawImage img;
    img.header = parse_header(bytes);
    const Header& h = img.header;
    img.shape = GridShape{static_cast<std::size_t>(h.dim[1]),
                          static_cast<std::size_t>(h.dim[2]),
                          static_cast<std::size_t>(h.dim[3]),
                          std::abs(static_cast<double>(h.pixdim[1])),
                          std::abs(static_cast<double>(h.pixdim[2])),
                          std::abs(static_cast<double>(h.pixdim[3]))};
    const std::size_t count = img.shape.voxel_count() * static_cast<std::size_t>(h.components());
    const auto width = static_cast<std::size_t>(bytes_per_value(h.datatype));
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    if (bytes.size() < offset || bytes.size() - offset < count * width) {
        throw NiftiError(NiftiError::Kind::truncated_data, "data section shorter than dim[] requires");
    }
    ByteReader rd(bytes, h.swapped);
    img.values.resize(count);
    for (std::size_t v = 0; v < count; ++v) {
        const std::size_t at = offset + v * width;
        switch (h.datatype) {
            case dt_uint8: img.values[v] = bytes[at]; break;
            case dt_int16: img.values[v] = rd.get<std::int16_t>(at); break;
            case dt_int32: img.values[v] = rd.get<std::int32_t>(at); break;
            case dt_float32: img.values[v] = rd.get<float>(at); break;
            case dt_float64: img.values[v] = rd.get<double>(at); break;
            default: break;
        }
    }
    return img;
}

// scl_slope == 0 (or NaN) means "no scaling"; identity scaling is skipped so float data stays bit-exact.
inline bool applies_scaling(const Header& h) {
    if (!std::isfinite(h.scl_slope) || h.scl_slope == 0.0f) return false;
    return !(h.scl_slope == 1.0f && (h.scl_inter == 0.0f || !std::isfinite(h.scl_inter)));
}

inline bool label_scaling_ok(const Header& h) {
    const bool slope_ok = h.scl_slope == 0.0f || h.scl_slope == 1.0f || std::isnan(h.scl_slope);
    const bool inter_ok = h.scl_inter == 0.0f || std::isnan(h.scl_inter);
    return slope_ok && inter_ok;
}

inline std::vector<unsigned char> make_header(const GridShape& g, int components, std::int16_t datatype) {
    std::vector<unsigned char> bytes(kDataOffset, 0);
    put<std::int32_t>(bytes, kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
    std::array<std::int16_t, 8> dim = {3,
                                       static_cast<std::int16_t>(g.nx),
                                       static_cast<std::int16_t>(g.ny),
                                       static_cast<std::int16_t>(g.nz),
                                       1,
                                       1,
                                       1,
                                       1};
    if (components == 3) {
        dim[0] = 5;
        dim[5] = 3;
        put<std::int16_t>(bytes, kOffIntentCode, kIntentVector);
    }
    for (std::size_t d = 0; d < 8; ++d) put<std::int16_t>(bytes, kOffDim + 2 * d, dim[d]);
    put<std::int16_t>(bytes, kOffDatatype, datatype);
    put<std::int16_t>(bytes, kOffBitpix, static_cast<std::int16_t>(8 * bytes_per_value(datatype)));
    const std::array<float, 8> pixdim = {1.0f, static_cast<float>(g.sx), static_cast<float>(g.sy),
                                         static_cast<float>(g.sz), 1.0f, 1.0f, 1.0f, 1.0f};
    for (std::size_t d = 0; d < 8; ++d) put<float>(bytes, kOffPixdim + 4 * d, pixdim[d]);
    put<float>(bytes, kOffVoxOffset, static_cast<float>(kDataOffset));
    put<float>(bytes, kOffSclSlope, 1.0f);
    put<float>(bytes, kOffSclInter, 0.0f);
    bytes[kOffXyztUnits] = 2;  // millimetres
    put<std::int16_t>(bytes, kOffQformCode, 0);
    put<std::int16_t>(bytes, kOffSformCode, 1);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            const float v = r == c ? pixdim[r + 1] : 0.0f;
            put<float>(bytes, kOffSrowX + 16 * r + 4 * c, v);
        }
    }
    std::memcpy(bytes.data() + kOffMagic, "n+1\0", 4);
    return bytes;
}

inline void check_writable_grid(const GridShape& g) {
    constexpr std::size_t kMaxDim = 32767;
    if (g.nx > kMaxDim || g.ny > kMaxDim || g.nz > kMaxDim) {
        throw ValidationError("grid dimension exceeds NIfTI-1 int16 limit");
    }
}

inline ScalarVolume to_scalar(const RawImage& img) {
    if (img.header.components() != 1) {
        throw NiftiError(NiftiError::Kind::bad_dimensions, "expected a scalar volume, found a vector field");
    }
    std::vector<float> data(img.values.size());
    const bool scaled = applies_scaling(img.header);
    const double slope = img.header.scl_slope;
    const double inter = std::isfinite(img.header.scl_inter) ? img.header.scl_inter : 0.0;
    for (std::size_t v = 0; v < data.size(); ++v) {
        const double value = scaled ? slope * img.values[v] + inter : img.values[v];
        data[v] = static_cast<float>(value);
        if (!std::isfinite(data[v])) throw ValidationError("non-finite intensity in scalar volume");
    }
    return ScalarVolume(img.shape, std::move(data));
}

inline LabelMap to_labels(const RawImage& img) {
    if (img.header.components() != 1) {
        throw NiftiError(NiftiError::Kind::bad_dimensions, "expected a label map, found a vector field");
    }
    if (!label_scaling_ok(img.header)) {
        throw NiftiError(NiftiError::Kind::bad_scaling, "label volumes require scl_slope in {0,1} and scl_inter 0");
    }
    std::vector<TissueClass> labels(img.values.size());
    for (std::size_t v = 0; v < labels.size(); ++v) {
        const double code = img.values[v];
        if (!(code >= 0.0 && code <= kMaxTissueCode) || code != std::floor(code)) {
            throw NiftiError(NiftiError::Kind::invalid_label, "voxel value is not a tissue code in 0..6");
        }
        labels[v] = static_cast<TissueClass>(static_cast<std::uint8_t>(code));
    }
    return LabelMap(img.shape, std::move(labels));
}

inline DeformationField to_field(const RawImage& img) {
    if (img.header.components() != 3) {
        throw NiftiError(NiftiError::Kind::bad_dimensions, "displacement field requires dim[0]=5 and dim[5]=3");
    }
    const std::size_t n = img.shape.voxel_count();
    std::vector<Vec3f> vectors(n);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t c = 0; c < 3; ++c) vectors[v][c] = static_cast<float>(img.values[c * n + v]);
    }
    return DeformationField(img.shape, std::move(vectors));
}

}  // namespace nifti

using AnyVolume = std::variant<ScalarVolume, LabelMap, DeformationField>;

inline ScalarVolume read_scalar_volume(const std::filesystem::path& path) {
    return nifti::to_scalar(nifti::decode(nifti::read_file_bytes(path)));
}

inline LabelMap read_label_map(const std::filesystem::path& path) {
    return nifti::to_labels(nifti::decode(nifti::read_file_bytes(path)));
}

inline DeformationField read_deformation_field(const std::filesystem::path& path) {
    return nifti::to_field(nifti::decode(nifti::read_file_bytes(path)));
}

// Classifies by content: 3 components gives a field; an unscaled integer
// volume whose values are all tissue codes gives a label map; anything else
// is a scalar volume.
inline AnyVolume read_nifti(const std::filesystem::path& path) {
    const nifti::RawImage img = nifti::decode(nifti::read_file_bytes(path));
    if (img.header.components() == 3) return nifti::to_field(img);
    if (nifti::is_integer_datatype(img.header.datatype) && nifti::label_scaling_ok(img.header)) {
        const bool all_codes = std::all_of(img.values.begin(), img.values.end(),
                                           [](double v) { return v >= 0.0 && v <= kMaxTissueCode; });
        if (all_codes) return nifti::to_labels(img);
    }
    return nifti::to_scalar(img);
}

inline void write_nifti(const ScalarVolume& volume, const std::filesystem::path& path) {
    nifti::check_writable_grid(volume.shape());
    auto bytes = nifti::make_header(volume.shape(), 1, nifti::dt_float32);
    const std::size_t base = bytes.size();
    bytes.resize(base + 4 * volume.size());
    std::memcpy(bytes.data() + base, volume.data().data(), 4 * volume.size());
    nifti::write_file_bytes(path, bytes);
}

inline void write_nifti(const LabelMap& labels, const std::filesystem::path& path) {
    nifti::check_writable_grid(labels.shape());
    auto bytes = nifti::make_header(labels.shape(), 1, nifti::dt_uint8);
    for (TissueClass t : labels.data()) bytes.push_back(static_cast<unsigned char>(t));
    nifti::write_file_bytes(path, bytes);
}

inline void write_nifti(const DeformationField& field, const std::filesystem::path& path) {
    nifti::check_writable_grid(field.shape());
    auto bytes = nifti::make_header(field.shape(), 3, nifti::dt_float32);
    const std::size_t base = bytes.size();
    const std::size_t n = field.size();
    bytes.resize(base + 12 * n);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t v = 0; v < n; ++v) {
            std::memcpy(bytes.data() + base + 4 * (c * n + v), &field[v][c], 4);
        }
    }
    nifti::write_file_bytes(path, bytes);
}

inline void write_nifti(const AnyVolume& volume, const std::filesystem::path& path) {
    std::visit([&](const auto& v) { write_nifti(v, path); }, volume);
}

}  // namespace segqa

#endif  // SEGQA_NIFTI_HPP
