#ifndef SEGQA_REGISTRATION_FEATURES_HPP
#define SEGQA_REGISTRATION_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "segqa/error.hpp"
#include "segqa/grid.hpp"

namespace segqa {

inline constexpr std::size_t kMaxConsistencySamples = 100000;

// Head-mask voxel indices, thinned by a fixed stride so at most
// kMaxConsistencySamples remain. stride = ceil(count / limit).
inline std::vector<std::size_t> consistency_samples(const LabelMap& labels,
                                                    std::size_t limit = kMaxConsistencySamples) {
    std::vector<std::size_t> head;
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (in_head(labels[v])) head.push_back(v);
    }
    if (head.empty()) throw ValidationError("head mask is empty; cannot sample inverse consistency");
    const std::size_t stride = (head.size() + limit - 1) / limit;
    if (stride <= 1) return head;
    std::vector<std::size_t> picked;
    picked.reserve(head.size() / stride + 1);
    for (std::size_t s = 0; s < head.size(); s += stride) picked.push_back(head[s]);
    return picked;
}

// Mean round-trip error ||inv(fwd(p)) - p|| in mm over head voxel centres.
inline double inverse_consistency(const AffineTransform& fwd, const AffineTransform& inv, const LabelMap& labels) {
    const auto samples = consistency_samples(labels);
    const GridShape& g = labels.shape();
    double total = 0.0;
    for (std::size_t v : samples) {
        const Vec3 p = voxel_center(g, v);
        const Vec3 q = inv.apply(fwd.apply(p));
        const double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return total / static_cast<double>(samples.size());
}

struct DeformationStats {
    double bias_mm = 0.0;                     // norm of the mean displacement
    double directional_variability_mm = 0.0;  // population SD of the three per-axis means
    double per_axis_variability_mm = 0.0;     // mean of the three per-axis population SDs
    Vec3 mean_vector{};                       // raw mean displacement, kept for diagnostics
};

// Running mean / sum of squared deviations. Partial accumulators merge exactly
// enough for parallel reductions.
struct MomentAccumulator {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        count += 1.0;
        const double delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }

    void merge(const MomentAccumulator& o) {
        if (o.count == 0.0) return;
        if (count == 0.0) {
            *this = o;
            return;
        }
        const double n = count + o.count;
        const double delta = o.mean - mean;
        mean += delta * o.count / n;
        m2 += o.m2 + delta * delta * count * o.count / n;
        count = n;
    }

    double population_sd() const { return count > 0.0 ? std::sqrt(std::max(m2, 0.0) / count) : 0.0; }
};

inline DeformationStats deformation_stats(const DeformationField& field) {
    if (field.size() == 0) throw ValidationError("deformation field has no voxels");
    std::array<MomentAccumulator, 3> axis;
    for (const Vec3f& d : field.data()) {
        for (std::size_t c = 0; c < 3; ++c) axis[c].add(d[c]);
    }
    DeformationStats out;
    for (std::size_t c = 0; c < 3; ++c) out.mean_vector[c] = axis[c].mean;
    const Vec3& m = out.mean_vector;
    out.bias_mm = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
    const double mm = (m[0] + m[1] + m[2]) / 3.0;
    out.directional_variability_mm =
        std::sqrt(((m[0] - mm) * (m[0] - mm) + (m[1] - mm) * (m[1] - mm) + (m[2] - mm) * (m[2] - mm)) / 3.0);
    out.per_axis_variability_mm =
        (axis[0].population_sd() + axis[1].population_sd() + axis[2].population_sd()) / 3.0;
    return out;
}

}  // namespace segqa

#endif  // SEGQA_REGISTRATION_FEATURES_HPP
