#ifndef SEGQA_PHANTOM_HPP
#define SEGQA_PHANTOM_HPP

// Synthetic head cohorts: nested ellipsoid anatomy, noisy T1-like intensities,
// segmentation corruption and registration outputs whose error grows with a
// single severity knob s in [0, 1].
//
// Random numbers come from xoshiro256** (Blackman & Vigna) seeded through
// splitmix64, so fixtures can be reproduced outside this library:
//   splitmix64: z += 0x9E3779B97F4A7C15; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//               z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)
//   xoshiro256**: result = rotl(s1 * 5, 7) * 9; t = s1 << 17; s2 ^= s0; s3 ^= s1;
//                 s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//   uniform(): (next() >> 11) * 2^-53
//   gaussian(): Box-Muller, u1 = 1 - uniform(), u2 = uniform(),
//               sqrt(-2 ln u1) * cos(2 pi u2); the sine branch is discarded.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "segqa/affine_io.hpp"
#include "segqa/error.hpp"
#include "segqa/grid.hpp"
#include "segqa/manifest.hpp"
#include "segqa/nifti.hpp"

namespace segqa {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Independent child seed for a numbered stream of a parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (stream * 0xD1B54A32D192ED03ULL);
    splitmix64(state);
    return splitmix64(state);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n) by rejection, n >= 1.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

    bool coin() { return (next() >> 63) != 0; }

    double gaussian() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Vec3 unit_vector() {
        for (;;) {
            const Vec3 v = {uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
            const double n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if (n2 > 1e-6 && n2 <= 1.0) {
                const double n = std::sqrt(n2);
                return {v[0] / n, v[1] / n, v[2] / n};
            }
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_{};
};

struct TissueAppearance {
    double mean = 0.0;
    double noise_sd = 0.0;
};

// Shell order, outermost first.
inline constexpr std::array<TissueClass, 5> kShellOrder = {TissueClass::Skin, TissueClass::Skull, TissueClass::CSF,
                                                          TissueClass::GM, TissueClass::WM};

struct PhantomParams {
    GridShape shape{64, 64, 64, 2.0, 2.0, 2.0};
    // Ellipsoid semi-axes (mm) in kShellOrder; strictly nested.
    std::array<Vec3, 5> semi_axes_mm = {{
        {58.0, 52.0, 46.0},
        {52.0, 46.0, 40.0},
        {46.0, 40.0, 34.0},
        {42.0, 36.0, 30.0},
        {32.0, 26.0, 20.0},
    }};
    // Indexed by tissue code.
    std::array<TissueAppearance, kMaxTissueCode + 1> appearance = {{
        {0.0, 5.0},     // background
        {200.0, 25.0},  // csf
        {600.0, 40.0},  // skin
        {450.0, 30.0},  // gm
        {700.0, 30.0},  // wm
        {120.0, 25.0},  // skull
        {300.0, 30.0},  // tumor (never generated)
    }};
    double severity = 0.0;
    std::uint64_t seed = 0;
};

inline void validate(const PhantomParams& p) {
    validate(p.shape);
    if (!(p.severity >= 0.0 && p.severity <= 1.0)) throw ValidationError("phantom severity must lie in [0, 1]");
    for (std::size_t s = 0; s < p.semi_axes_mm.size(); ++s) {
        for (int a = 0; a < 3; ++a) {
            if (!(p.semi_axes_mm[s][a] > 0.0)) throw ValidationError("phantom semi-axes must be positive");
            if (s > 0 && !(p.semi_axes_mm[s][a] < p.semi_axes_mm[s - 1][a])) {
                throw ValidationError("phantom shells are not strictly nested");
            }
        }
    }
    for (const auto& ap : p.appearance) {
        if (!std::isfinite(ap.mean) || !(ap.noise_sd >= 0.0)) throw ValidationError("invalid tissue appearance");
    }
}

inline void check_severity(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("severity must lie in [0, 1]");
}

struct Phantom {
    ScalarVolume image;
    LabelMap labels;
};

inline LabelMap phantom_labels(const PhantomParams& p) {
    validate(p);
    const GridShape& g = p.shape;
    const Vec3 centre = {0.5 * static_cast<double>(g.nx - 1) * g.sx, 0.5 * static_cast<double>(g.ny - 1) * g.sy,
                         0.5 * static_cast<double>(g.nz - 1) * g.sz};
    std::vector<TissueClass> labels(g.voxel_count(), TissueClass::Background);
    for (std::size_t v = 0; v < labels.size(); ++v) {
        const Vec3 pos = voxel_center(g, v);
        // Innermost containing shell wins.
        for (std::size_t s = kShellOrder.size(); s-- > 0;) {
            const Vec3& ax = p.semi_axes_mm[s];
            double q = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double d = (pos[a] - centre[a]) / ax[a];
                q += d * d;
            }
            if (q <= 1.0) {
                labels[v] = kShellOrder[s];
                break;
            }
        }
    }
    return LabelMap(g, std::move(labels));
}

inline Phantom generate_phantom(const PhantomParams& p) {
    LabelMap labels = phantom_labels(p);
    Rng rng(derive_seed(p.seed, 1));
    std::vector<float> image(labels.size());
    for (std::size_t v = 0; v < image.size(); ++v) {
        const auto& ap = p.appearance[static_cast<std::size_t>(labels[v])];
        const double noise = rng.gaussian();
        image[v] = static_cast<float>(ap.mean + ap.noise_sd * noise);
    }
    return Phantom{ScalarVolume(p.shape, std::move(image)), std::move(labels)};
}

namespace detail {

// Face neighbours in a fixed order: -x, +x, -y, +y, -z, +z.
template <typename Fn>
void for_each_face_neighbour(const GridShape& g, std::size_t v, Fn&& fn) {
    const VoxelCoord c = voxel_coord(g, v);
    const std::size_t sx = 1, sy = g.nx, sz = g.nx * g.ny;
    if (c.i > 0) fn(v - sx);
    if (c.i + 1 < g.nx) fn(v + sx);
    if (c.j > 0) fn(v - sy);
    if (c.j + 1 < g.ny) fn(v + sy);
    if (c.k > 0) fn(v - sz);
    if (c.k + 1 < g.nz) fn(v + sz);
}

// One 6-connected dilation step of tissue t; tumor voxels never change.
inline void dilate_once(const GridShape& g, std::vector<TissueClass>& labels, TissueClass t) {
    const std::vector<TissueClass> before = labels;
    for (std::size_t v = 0; v < before.size(); ++v) {
        if (before[v] == t || before[v] == TissueClass::Tumor) continue;
        bool touches = false;
        for_each_face_neighbour(g, v, [&](std::size_t u) { touches = touches || before[u] == t; });
        if (touches) labels[v] = t;
    }
}

// One erosion step: boundary voxels of t take the label of their first
// differing, non-tumor face neighbour.
inline void erode_once(const GridShape& g, std::vector<TissueClass>& labels, TissueClass t) {
    const std::vector<TissueClass> before = labels;
    for (std::size_t v = 0; v < before.size(); ++v) {
        if (before[v] != t) continue;
        bool replaced = false;
        for_each_face_neighbour(g, v, [&](std::size_t u) {
            if (!replaced && before[u] != t && before[u] != TissueClass::Tumor) {
                labels[v] = before[u];
                replaced = true;
            }
        });
    }
}

}  // namespace detail

inline constexpr std::size_t kDirectionBlocksPerAxis = 8;

// Seeded boundary corruption. The grid is split into 8x8x8 blocks; inside
// each block every scored tissue is either dilated or eroded (coin flip per
// tissue and block) by floor(3s) face-connected steps. Every boundary voxel
// then flips to a random differing neighbour label with probability 0.3s.
inline LabelMap perturb_segmentation(const LabelMap& truth, double severity, std::uint64_t seed) {
    check_severity(severity);
    if (severity == 0.0) return truth;
    const GridShape& g = truth.shape();
    Rng rng(seed);
    std::vector<TissueClass> labels(truth.data().begin(), truth.data().end());

    const auto block_edge = [](std::size_t n) { return (n + kDirectionBlocksPerAxis - 1) / kDirectionBlocksPerAxis; };
    const std::size_t bx = block_edge(g.nx), by = block_edge(g.ny), bz = block_edge(g.nz);
    const auto block_of = [&](std::size_t v) {
        const VoxelCoord c = voxel_coord(g, v);
        return c.i / bx + kDirectionBlocksPerAxis * (c.j / by + kDirectionBlocksPerAxis * (c.k / bz));
    };
    constexpr std::size_t kBlocks = kDirectionBlocksPerAxis * kDirectionBlocksPerAxis * kDirectionBlocksPerAxis;

    const int radius = static_cast<int>(std::floor(3.0 * severity));
    std::array<bool, kBlocks> grow{};
    for (TissueClass t : kScoredTissues) {
        for (auto& b : grow) b = rng.coin();
        if (radius == 0) continue;
        std::vector<TissueClass> grown = labels, shrunk = labels;
        for (int step = 0; step < radius; ++step) {
            detail::dilate_once(g, grown, t);
            detail::erode_once(g, shrunk, t);
        }
        for (std::size_t v = 0; v < labels.size(); ++v) labels[v] = grow[block_of(v)] ? grown[v] : shrunk[v];
    }

    const double flip_probability = 0.3 * severity;
    const std::vector<TissueClass> settled = labels;
    std::vector<TissueClass> candidates;
    for (std::size_t v = 0; v < settled.size(); ++v) {
        if (settled[v] == TissueClass::Tumor) continue;
        candidates.clear();
        detail::for_each_face_neighbour(g, v, [&](std::size_t u) {
            if (settled[u] != settled[v] && settled[u] != TissueClass::Tumor) candidates.push_back(settled[u]);
        });
        if (candidates.empty()) continue;
        if (rng.uniform() < flip_probability) labels[v] = candidates[rng.below(candidates.size())];
    }
    return LabelMap(g, std::move(labels));
}

struct SyntheticRegistration {
    AffineTransform fwd;
    AffineTransform inv;
    DeformationField field;
};

inline constexpr double kInverseErrorPerSeverityMm = 2.0;
inline constexpr double kFieldBiasPerSeverityMm = 3.0;

// fwd: small rotation, anisotropic scale and translation. inv: the exact
// inverse followed by a translation of 2s mm in a random direction, so the
// round-trip residual is 2s everywhere. The field is s times a fixed smooth
// random field (constant bias plus one plane wave per axis).
inline SyntheticRegistration synth_registration(double severity, std::uint64_t seed, const GridShape& shape) {
    check_severity(severity);
    validate(shape);
    Rng rng(seed);

    const double deg = std::numbers::pi / 180.0;
    const double ax = rng.uniform(-2.0, 2.0) * deg, ay = rng.uniform(-2.0, 2.0) * deg,
                 az = rng.uniform(-2.0, 2.0) * deg;
    const Vec3 scale = {rng.uniform(0.97, 1.03), rng.uniform(0.97, 1.03), rng.uniform(0.97, 1.03)};
    const Vec3 shift = {rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
    const double cx = std::cos(ax), sx = std::sin(ax), cy = std::cos(ay), sy = std::sin(ay), cz = std::cos(az),
                 sz = std::sin(az);
    // R = Rz * Ry * Rx
    const std::array<std::array<double, 3>, 3> rot = {{
        {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
        {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
        {-sy, cy * sx, cy * cx},
    }};
    Matrix4 m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = rot[r][c] * scale[c];
        m[r][3] = shift[r];
    }
    m[3][3] = 1.0;
    const AffineTransform fwd(m);

    const Vec3 dir = rng.unit_vector();
    const double err = kInverseErrorPerSeverityMm * severity;
    const AffineTransform inv =
        AffineTransform::translation({err * dir[0], err * dir[1], err * dir[2]}).compose(fwd.inverse());

    const Vec3 bias_dir = rng.unit_vector();
    const double bias_scale = kFieldBiasPerSeverityMm * rng.uniform(0.8, 1.2);
    struct Wave {
        double amplitude;
        std::array<double, 3> k;
        double phase;
    };
    std::array<Wave, 3> waves{};
    for (auto& w : waves) {
        w.amplitude = rng.uniform(1.0, 1.5);
        for (int a = 0; a < 3; ++a) w.k[a] = static_cast<double>(1 + rng.below(2));
        w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const std::array<double, 3> extent = {static_cast<double>(shape.nx) * shape.sx,
                                          static_cast<double>(shape.ny) * shape.sy,
                                          static_cast<double>(shape.nz) * shape.sz};
    std::vector<Vec3f> vectors(shape.voxel_count());
    for (std::size_t v = 0; v < vectors.size(); ++v) {
        const Vec3 p = voxel_center(shape, v);
        for (int c = 0; c < 3; ++c) {
            const Wave& w = waves[c];
            double arg = w.phase;
            for (int a = 0; a < 3; ++a) arg += 2.0 * std::numbers::pi * w.k[a] * p[a] / extent[a];
            const double d = bias_scale * bias_dir[c] + w.amplitude * std::sin(arg);
            vectors[v][c] = static_cast<float>(severity * d);
        }
    }
    return SyntheticRegistration{fwd, inv, DeformationField(shape, std::move(vectors))};
}

// ---------------------------------------------------------------------------
// Cohorts

struct CohortOptions {
    std::size_t size = 64;  // voxels per axis; spacing keeps a 128 mm field of view
    PhantomParams base;
};

inline std::string subject_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "phantom_%03zu", index);
    return buf;
}

struct GeneratedSubject {
    SubjectRecord record;
    Phantom phantom;
    LabelMap computed;
    SyntheticRegistration registration;
};

// Builds subject `index` of an n-subject cohort in memory. Severities are
// evenly spaced over [0, 1]; anatomy and noise level are jittered per subject.
inline GeneratedSubject make_cohort_subject(std::size_t index, std::size_t n, std::uint64_t seed,
                                            const CohortOptions& opt = {}) {
    if (n < 2) throw ValidationError("a cohort needs at least 2 subjects");
    if (opt.size < 4) throw ValidationError("phantom grid size must be >= 4");
    const std::uint64_t subject_seed = derive_seed(seed, index);
    const double severity = static_cast<double>(index) / static_cast<double>(n - 1);

    PhantomParams p = opt.base;
    const double spacing = 128.0 / static_cast<double>(opt.size);
    p.shape = GridShape{opt.size, opt.size, opt.size, spacing, spacing, spacing};
    p.severity = severity;
    p.seed = derive_seed(subject_seed, 10);
    Rng jitter(derive_seed(subject_seed, 11));
    const double anatomy_scale = jitter.uniform(0.94, 1.0);
    for (auto& ax : p.semi_axes_mm) {
        for (double& a : ax) a *= anatomy_scale;
    }
    const double noise_scale = jitter.uniform(0.8, 1.2);
    for (auto& ap : p.appearance) ap.noise_sd *= noise_scale;

    GeneratedSubject out{};
    out.phantom = generate_phantom(p);
    out.computed = perturb_segmentation(out.phantom.labels, severity, derive_seed(subject_seed, 12));
    out.registration = synth_registration(severity, derive_seed(subject_seed, 13), p.shape);
    out.record.id = subject_id(index);
    out.record.metadata = {{"severity", severity}, {"seed", subject_seed}};
    return out;
}

// Writes <dir>/<id>/{mri,validated_seg,computed_seg,deformation}.nii,
// affine_{fwd,inv}.txt and <dir>/manifest.json.
template <typename Executor>
CohortManifest generate_cohort(std::size_t n, std::uint64_t seed, const std::filesystem::path& dir,
                               const CohortOptions& opt, Executor&& for_each_subject) {
    if (n < 2) throw ValidationError("a cohort needs at least 2 subjects");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    CohortManifest manifest;
    manifest.subjects.resize(n);
    for_each_subject(n, [&](std::size_t i) {
        GeneratedSubject s = make_cohort_subject(i, n, seed, opt);
        const std::filesystem::path sub = dir / s.record.id;
        std::filesystem::create_directories(sub);
        s.record.mri = sub / "mri.nii";
        s.record.validated_seg = sub / "validated_seg.nii";
        s.record.computed_seg = sub / "computed_seg.nii";
        s.record.affine_fwd = sub / "affine_fwd.txt";
        s.record.affine_inv = sub / "affine_inv.txt";
        s.record.deformation = sub / "deformation.nii";
        write_nifti(s.phantom.image, s.record.mri);
        write_nifti(s.phantom.labels, *s.record.validated_seg);
        write_nifti(s.computed, s.record.computed_seg);
        write_affine(s.registration.fwd, s.record.affine_fwd);
        write_affine(s.registration.inv, s.record.affine_inv);
        write_nifti(s.registration.field, s.record.deformation);
        manifest.subjects[i] = std::move(s.record);
    });
    write_manifest(manifest, dir / "manifest.json");
    return manifest;
}

inline CohortManifest generate_cohort(std::size_t n, std::uint64_t seed, const std::filesystem::path& dir,
                                      const CohortOptions& opt = {}) {
    return generate_cohort(n, seed, dir, opt, [](std::size_t count, auto&& fn) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
    });
}

}  // namespace segqa

#endif  // SEGQA_PHANTOM_HPP
