#ifndef SEGQA_MORPHOMETRY_HPP
#define SEGQA_MORPHOMETRY_HPP

// Per-tissue shape and intensity measures, plus the Dice overlap used as the
// regression target.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "segqa/error.hpp"
#include "segqa/grid.hpp"

namespace segqa {

// Dice per scored tissue, indexed in kScoredTissues order.
struct DiceScores {
    std::array<double, kScoredTissueCount> values{};

    double& operator[](TissueClass t) { return values[scored_index(t)]; }
    double operator[](TissueClass t) const { return values[scored_index(t)]; }

    friend bool operator==(const DiceScores&, const DiceScores&) = default;
};

inline void validate(const DiceScores& d) {
    for (double v : d.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("Dice value outside [0, 1]");
    }
}

// 2|A∩B| / (|A|+|B|); two empty sets agree perfectly and score 1.
inline double dice(const LabelMap& a, const LabelMap& b, TissueClass t) {
    require_same_grid(a.shape(), b.shape(), "dice");
    if (t == TissueClass::Background) throw ValidationError("Dice is undefined for the background label");
    std::uint64_t na = 0, nb = 0, both = 0;
    for (std::size_t v = 0; v < a.size(); ++v) {
        const bool in_a = a[v] == t;
        const bool in_b = b[v] == t;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return static_cast<double>(2 * both) / static_cast<double>(na + nb);
}

inline std::size_t voxel_count(const LabelMap& labels, TissueClass t) {
    return static_cast<std::size_t>(std::count(labels.data().begin(), labels.data().end(), t));
}

inline double tissue_volume(const LabelMap& labels, TissueClass t) {
    return static_cast<double>(voxel_count(labels, t)) * labels.shape().voxel_volume();
}

namespace detail {

class DisjointSets {
  public:
    std::uint32_t make() {
        parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
        return parent_.back();
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent_[a] = b;
    }

    std::size_t size() const { return parent_.size(); }

  private:
    std::vector<std::uint32_t> parent_;
};

}  // namespace detail

// Number of 26-connected components among set voxels. Single raster pass
// with union-find over the 13 already-visited neighbours.
inline std::size_t count_components(const BinaryMask& mask) {
    const GridShape& g = mask.shape();
    constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> label(mask.size(), kNone);
    detail::DisjointSets sets;

    const auto nx = static_cast<std::ptrdiff_t>(g.nx);
    const auto ny = static_cast<std::ptrdiff_t>(g.ny);
    const auto nz = static_cast<std::ptrdiff_t>(g.nz);

    // Neighbours preceding (i,j,k) in x-fastest order.
    struct Offset {
        int di, dj, dk;
    };
    std::vector<Offset> back;
    for (int dk = -1; dk <= 0; ++dk) {
        for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
                if (dk == 0 && (dj > 0 || (dj == 0 && di >= 0))) continue;
                back.push_back({di, dj, dk});
            }
        }
    }

    std::size_t v = 0;
    for (std::ptrdiff_t k = 0; k < nz; ++k) {
        for (std::ptrdiff_t j = 0; j < ny; ++j) {
            for (std::ptrdiff_t i = 0; i < nx; ++i, ++v) {
                if (mask[v] == 0) continue;
                std::uint32_t mine = kNone;
                for (const Offset& o : back) {
                    const std::ptrdiff_t ii = i + o.di, jj = j + o.dj, kk = k + o.dk;
                    if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < 0) continue;
                    const std::uint32_t other = label[static_cast<std::size_t>(ii + nx * (jj + ny * kk))];
                    if (other == kNone) continue;
                    if (mine == kNone) {
                        mine = other;
                    } else {
                        sets.unite(mine, other);
                    }
                }
                label[v] = mine == kNone ? sets.make() : mine;
            }
        }
    }
    std::size_t roots = 0;
    for (std::uint32_t s = 0; s < sets.size(); ++s) roots += sets.find(s) == s;
    return roots;
}

inline std::size_t connected_components(const LabelMap& labels, TissueClass t) {
    return count_components(mask_of(labels, t));
}

inline constexpr double kSnrCap = 1e6;

// |mean| / population SD of intensities inside tissue t. Zero-variance
// regions return kSnrCap; absent tissue returns 0.
inline double snr(const ScalarVolume& image, const LabelMap& labels, TissueClass t) {
    require_same_grid(image.shape(), labels.shape(), "snr");
    std::size_t n = 0;
    double sum = 0.0;
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (std::size_t v = 0; v < image.size(); ++v) {
        if (labels[v] != t) continue;
        ++n;
        sum += image[v];
        lo = std::min(lo, image[v]);
        hi = std::max(hi, image[v]);
    }
    if (n == 0) return 0.0;
    if (lo == hi) return kSnrCap;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t v = 0; v < image.size(); ++v) {
        if (labels[v] != t) continue;
        const double d = image[v] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    return std::min(std::abs(mean) / sd, kSnrCap);
}

// Smallest physical extent of the head mask's bounding box.
inline double shortest_axis_length(const LabelMap& labels) {
    const GridShape& g = labels.shape();
    std::array<std::size_t, 3> lo = {g.nx, g.ny, g.nz};
    std::array<std::size_t, 3> hi = {0, 0, 0};
    bool any = false;
    std::size_t v = 0;
    for (std::size_t k = 0; k < g.nz; ++k) {
        for (std::size_t j = 0; j < g.ny; ++j) {
            for (std::size_t i = 0; i < g.nx; ++i, ++v) {
                if (!in_head(labels[v])) continue;
                any = true;
                const std::array<std::size_t, 3> c = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], c[a]);
                    hi[a] = std::max(hi[a], c[a]);
                }
            }
        }
    }
    if (!any) throw ValidationError("head mask is empty");
    const auto spacing = g.spacing();
    double shortest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        shortest = std::min(shortest, static_cast<double>(hi[a] - lo[a] + 1) * spacing[a]);
    }
    return shortest;
}

}  // namespace segqa

#endif  // SEGQA_MORPHOMETRY_HPP
