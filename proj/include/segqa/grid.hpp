#ifndef SEGQA_GRID_HPP
#define SEGQA_GRID_HPP

// Volumetric data model: grid geometry, typed voxel volumes, tissue labels
// and physical-space affine transforms.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "segqa/error.hpp"

namespace segqa {

struct GridShape {
    std::size_t nx = 1, ny = 1, nz = 1;
    double sx = 1.0, sy = 1.0, sz = 1.0;

    std::size_t voxel_count() const { return nx * ny * nz; }
    double voxel_volume() const { return sx * sy * sz; }
    std::array<std::size_t, 3> dims() const { return {nx, ny, nz}; }
    std::array<double, 3> spacing() const { return {sx, sy, sz}; }

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline void validate(const GridShape& g) {
    if (g.nx < 1 || g.ny < 1 || g.nz < 1) {
        throw ValidationError("grid dimensions must be >= 1");
    }
    for (double s : g.spacing()) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ValidationError("grid spacing must be finite and > 0");
        }
    }
}

inline std::string to_string(const GridShape& g) {
    return std::to_string(g.nx) + "x" + std::to_string(g.ny) + "x" + std::to_string(g.nz);
}

struct VoxelCoord {
    std::size_t i = 0, j = 0, k = 0;
    friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
};

// Flat index in x-fastest order: i + nx*(j + ny*k).
inline std::size_t voxel_index(const GridShape& g, std::size_t i, std::size_t j, std::size_t k) {
    if (i >= g.nx || j >= g.ny || k >= g.nz) {
        throw ValidationError("voxel coordinate (" + std::to_string(i) + "," + std::to_string(j) + "," +
                              std::to_string(k) + ") outside grid " + to_string(g));
    }
    return i + g.nx * (j + g.ny * k);
}

inline VoxelCoord voxel_coord(const GridShape& g, std::size_t index) {
    if (index >= g.voxel_count()) {
        throw ValidationError("flat voxel index out of range");
    }
    VoxelCoord c;
    c.i = index % g.nx;
    index /= g.nx;
    c.j = index % g.ny;
    c.k = index / g.ny;
    return c;
}

// ---------------------------------------------------------------------------
// Tissue labels

enum class TissueClass : std::uint8_t { Background = 0, CSF = 1, Skin = 2, GM = 3, WM = 4, Skull = 5, Tumor = 6 };

inline constexpr std::uint8_t kMaxTissueCode = 6;
inline constexpr std::size_t kScoredTissueCount = 5;

// Tissues that carry features and Dice targets, in reporting order.
inline constexpr std::array<TissueClass, kScoredTissueCount> kScoredTissues = {
    TissueClass::CSF, TissueClass::Skin, TissueClass::GM, TissueClass::WM, TissueClass::Skull};

inline constexpr bool is_valid_tissue_code(std::uint8_t code) { return code <= kMaxTissueCode; }

// Head mask membership: any labelled tissue except the tumor.
inline constexpr bool in_head(TissueClass t) { return t != TissueClass::Background && t != TissueClass::Tumor; }

inline std::string_view tissue_name(TissueClass t) {
    switch (t) {
        case TissueClass::Background: return "background";
        case TissueClass::CSF: return "csf";
        case TissueClass::Skin: return "skin";
        case TissueClass::GM: return "gm";
        case TissueClass::WM: return "wm";
        case TissueClass::Skull: return "skull";
        case TissueClass::Tumor: return "tumor";
    }
    return "unknown";
}

inline std::optional<TissueClass> tissue_from_name(std::string_view name) {
    for (std::uint8_t c = 0; c <= kMaxTissueCode; ++c) {
        auto t = static_cast<TissueClass>(c);
        if (tissue_name(t) == name) return t;
    }
    return std::nullopt;
}

// Position of a scored tissue within kScoredTissues.
inline std::size_t scored_index(TissueClass t) {
    for (std::size_t i = 0; i < kScoredTissues.size(); ++i) {
        if (kScoredTissues[i] == t) return i;
    }
    throw ValidationError("tissue '" + std::string(tissue_name(t)) + "' is not a scored tissue");
}

// ---------------------------------------------------------------------------
// Volumes

using Vec3 = std::array<double, 3>;
using Vec3f = std::array<float, 3>;

namespace detail {

template <typename T>
struct VoxelTraits {
    static bool valid(const T&) { return true; }
};

template <>
struct VoxelTraits<float> {
    static bool valid(float v) { return std::isfinite(v); }
};

template <>
struct VoxelTraits<Vec3f> {
    static bool valid(const Vec3f& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }
};

template <>
struct VoxelTraits<TissueClass> {
    static bool valid(TissueClass t) { return is_valid_tissue_code(static_cast<std::uint8_t>(t)); }
};

}  // namespace detail

// Immutable voxel grid. Element order is x-fastest.
template <typename T>
class Volume {
  public:
    using value_type = T;

    Volume() = default;

    Volume(GridShape shape, T fill) : shape_(shape) {
        validate(shape_);
        if (!detail::VoxelTraits<T>::valid(fill)) throw ValidationError("invalid voxel fill value");
        data_.assign(shape_.voxel_count(), fill);
    }

    Volume(GridShape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        validate(shape_);
        if (data_.size() != shape_.voxel_count()) {
            throw ValidationError("voxel buffer holds " + std::to_string(data_.size()) + " values, grid " +
                                  to_string(shape_) + " needs " + std::to_string(shape_.voxel_count()));
        }
        for (const T& v : data_) {
            if (!detail::VoxelTraits<T>::valid(v)) throw ValidationError("invalid voxel value in volume");
        }
    }

    const GridShape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::span<const T> data() const { return data_; }
    const T& operator[](std::size_t index) const { return data_[index]; }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const { return data_[voxel_index(shape_, i, j, k)]; }

    friend bool operator==(const Volume&, const Volume&) = default;

  private:
    GridShape shape_;
    std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using LabelMap = Volume<TissueClass>;
using DeformationField = Volume<Vec3f>;
using BinaryMask = Volume<std::uint8_t>;

inline void require_same_grid(const GridShape& a, const GridShape& b, std::string_view what) {
    if (!(a == b)) {
        throw ValidationError("grid mismatch (" + std::string(what) + "): " + to_string(a) + " vs " + to_string(b));
    }
}

inline BinaryMask mask_of(const LabelMap& labels, TissueClass t) {
    std::vector<std::uint8_t> bits(labels.size());
    for (std::size_t v = 0; v < labels.size(); ++v) bits[v] = labels[v] == t ? 1 : 0;
    return BinaryMask(labels.shape(), std::move(bits));
}

inline BinaryMask head_mask(const LabelMap& labels) {
    std::vector<std::uint8_t> bits(labels.size());
    for (std::size_t v = 0; v < labels.size(); ++v) bits[v] = in_head(labels[v]) ? 1 : 0;
    return BinaryMask(labels.shape(), std::move(bits));
}

// Physical position of a voxel centre: index times spacing. Orientation is ignored.
inline Vec3 voxel_center(const GridShape& g, std::size_t flat_index) {
    const VoxelCoord c = voxel_coord(g, flat_index);
    return {static_cast<double>(c.i) * g.sx, static_cast<double>(c.j) * g.sy, static_cast<double>(c.k) * g.sz};
}

// ---------------------------------------------------------------------------
// Affine transforms (physical mm to physical mm)

using Matrix4 = std::array<std::array<double, 4>, 4>;

class AffineTransform {
  public:
    static constexpr double kBottomRowTolerance = 1e-9;
    static constexpr double kMinDeterminant = 1e-12;

    AffineTransform() : m_(identity_matrix()) {}

    // The bottom row must be (0,0,0,1) within kBottomRowTolerance; it is then stored exactly.
    explicit AffineTransform(const Matrix4& m) : m_(m) {
        const std::array<double, 4> bottom = {0.0, 0.0, 0.0, 1.0};
        for (int c = 0; c < 4; ++c) {
            if (!std::isfinite(m_[3][c]) || std::abs(m_[3][c] - bottom[c]) > kBottomRowTolerance) {
                throw ValidationError("affine bottom row must be (0, 0, 0, 1)");
            }
            m_[3][c] = bottom[c];
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                if (!std::isfinite(m_[r][c])) throw ValidationError("affine entries must be finite");
            }
        }
        if (!(std::abs(determinant()) > kMinDeterminant)) {
            throw ValidationError("affine linear part is not invertible");
        }
    }

    static AffineTransform identity() { return AffineTransform(); }

    static AffineTransform translation(const Vec3& d) {
        Matrix4 m = identity_matrix();
        for (int r = 0; r < 3; ++r) m[r][3] = d[r];
        return AffineTransform(m);
    }

    const Matrix4& matrix() const { return m_; }

    double determinant() const {
        const auto& a = m_;
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    }

    Vec3 apply(const Vec3& p) const {
        Vec3 out{};
        for (int r = 0; r < 3; ++r) out[r] = m_[r][0] * p[0] + m_[r][1] * p[1] + m_[r][2] * p[2] + m_[r][3];
        return out;
    }

    AffineTransform inverse() const {
        const auto& a = m_;
        const double det = determinant();
        Matrix4 inv = identity_matrix();
        inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
        inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
        inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
        inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
        inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
        inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
        inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
        inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
        inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
        for (int r = 0; r < 3; ++r) {
            inv[r][3] = -(inv[r][0] * a[0][3] + inv[r][1] * a[1][3] + inv[r][2] * a[2][3]);
        }
        return AffineTransform(inv);
    }

    // (*this) after `rhs`: p -> this(rhs(p)).
    AffineTransform compose(const AffineTransform& rhs) const {
        Matrix4 out{};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += m_[r][k] * rhs.m_[k][c];
                out[r][c] = s;
            }
        }
        return AffineTransform(out);
    }

    friend bool operator==(const AffineTransform&, const AffineTransform&) = default;

  private:
    static Matrix4 identity_matrix() {
        Matrix4 m{};
        for (int d = 0; d < 4; ++d) m[d][d] = 1.0;
        return m;
    }

    Matrix4 m_;
};

}  // namespace segqa

#endif  // SEGQA_GRID_HPP
