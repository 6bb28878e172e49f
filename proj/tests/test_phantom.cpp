#include <gtest/gtest.h>

#include <json.hpp>

#include "golden.hpp"
#include "segqa/features.hpp"
#include "segqa/phantom.hpp"
#include "segqa/stats.hpp"
#include "test_support.hpp"

using namespace segqa;
using segqa::test::TempDir;

namespace {

double mean_dice(const LabelMap& a, const LabelMap& b) {
    double s = 0.0;
    for (TissueClass t : kScoredTissues) s += dice(a, b, t);
    return s / static_cast<double>(kScoredTissueCount);
}

PhantomParams small_params(std::uint64_t seed) {
    PhantomParams p;
    p.shape = GridShape{32, 32, 32, 4, 4, 4};
    p.seed = seed;
    return p;
}

std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = test::file_text(e.path());
    }
    return out;
}

}  // namespace

TEST(Rng, Determinism) {
    Rng a(99), b(99), c(100);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs = differs || x != c.next();
    }
    EXPECT_TRUE(differs);
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Rng, SplitMixReferenceValues) {
    // Published splitmix64 outputs for state 0.
    std::uint64_t s = 0;
    EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafull);
    EXPECT_EQ(splitmix64(s), 0x6e789e6aa1b965f4ull);
}

TEST(Rng, DistributionMoments) {
    Rng rng(7);
    double sum = 0, sq = 0, u = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
        u += rng.uniform();
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
    EXPECT_NEAR(u / n, 0.5, 0.005);
}

TEST(Phantom, DeterministicAndSeedDependent) {
    const Phantom a = generate_phantom(small_params(5));
    const Phantom b = generate_phantom(small_params(5));
    const Phantom c = generate_phantom(small_params(6));
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.image, c.image);
    EXPECT_EQ(a.labels, c.labels);
}

TEST(Phantom, GoldenDefaultSeed42) {
    PhantomParams p;
    p.seed = 42;
    const Phantom ph = generate_phantom(p);
    nlohmann::json j;
    j["image_fnv1a"] = test::fnv1a(ph.image.data().data(), ph.image.size() * sizeof(float));
    j["labels_fnv1a"] = test::fnv1a(ph.labels.data().data(), ph.labels.size());
    for (std::uint8_t c = 0; c <= 5; ++c) {
        j["count_" + std::string(tissue_name(static_cast<TissueClass>(c)))] =
            voxel_count(ph.labels, static_cast<TissueClass>(c));
    }
    const auto stored = nlohmann::json::parse(test::golden_text("phantom_seed42.json", j.dump(1) + "\n"));
    EXPECT_EQ(j, stored);
}

TEST(Phantom, NoiselessImageIsPiecewiseConstant) {
    PhantomParams p = small_params(8);
    for (auto& a : p.appearance) a.noise_sd = 0.0;
    const Phantom ph = generate_phantom(p);
    for (std::size_t v = 0; v < ph.image.size(); ++v) {
        EXPECT_EQ(ph.image[v], static_cast<float>(p.appearance[static_cast<std::size_t>(ph.labels[v])].mean));
    }
    for (TissueClass t : kScoredTissues) EXPECT_EQ(snr(ph.image, ph.labels, t), kSnrCap);
}

TEST(Phantom, ShortestAxisFollowsSmallestSemiAxis) {
    const Phantom ph = generate_phantom(PhantomParams{});
    const GridShape& g = ph.labels.shape();
    std::array<std::size_t, 3> lo{g.nx, g.ny, g.nz}, hi{0, 0, 0};
    for (std::size_t v = 0; v < ph.labels.size(); ++v) {
        if (ph.labels[v] == TissueClass::Background) continue;
        const VoxelCoord c = voxel_coord(g, v);
        const std::array<std::size_t, 3> xyz{c.i, c.j, c.k};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], xyz[a]);
            hi[a] = std::max(hi[a], xyz[a]);
        }
    }
    const double ez = static_cast<double>(hi[2] - lo[2] + 1) * g.sz;
    EXPECT_LT(ez, static_cast<double>(hi[0] - lo[0] + 1) * g.sx);
    EXPECT_LT(ez, static_cast<double>(hi[1] - lo[1] + 1) * g.sy);
    EXPECT_EQ(shortest_axis_length(ph.labels), ez);
}

TEST(Phantom, RejectsBadParams) {
    PhantomParams p;
    std::swap(p.semi_axes_mm[1], p.semi_axes_mm[2]);
    EXPECT_THROW(generate_phantom(p), ValidationError);
    PhantomParams q;
    q.severity = 1.5;
    EXPECT_THROW(generate_phantom(q), ValidationError);
    EXPECT_THROW(perturb_segmentation(LabelMap(test::cube(2), TissueClass::GM), -0.1, 1), ValidationError);
}

TEST(Perturb, SeverityZeroIsIdentity) {
    const LabelMap truth = phantom_labels(small_params(9));
    const LabelMap out = perturb_segmentation(truth, 0.0, 123);
    EXPECT_EQ(out, truth);
    for (TissueClass t : kScoredTissues) EXPECT_EQ(dice(out, truth, t), 1.0);
}

TEST(Perturb, DeterministicAndSeverityOrdered) {
    const LabelMap truth = phantom_labels(small_params(10));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const LabelMap hi = perturb_segmentation(truth, 1.0, seed);
        EXPECT_EQ(hi, perturb_segmentation(truth, 1.0, seed));
        const LabelMap lo = perturb_segmentation(truth, 0.2, seed);
        EXPECT_LT(mean_dice(hi, truth), mean_dice(lo, truth));
        EXPECT_LT(mean_dice(lo, truth), 1.0);
    }
}

TEST(Perturb, NeverIntroducesTumor) {
    const LabelMap truth = phantom_labels(small_params(11));
    const LabelMap out = perturb_segmentation(truth, 1.0, 4);
    EXPECT_EQ(voxel_count(out, TissueClass::Tumor), 0u);
}

TEST(SynthRegistration, SeverityZeroIsConsistent) {
    const auto g = small_params(0).shape;
    const LabelMap head = phantom_labels(small_params(0));
    const auto r = synth_registration(0.0, 17, g);
    EXPECT_LT(inverse_consistency(r.fwd, r.inv, head), 1e-9);
    const auto s = deformation_stats(r.field);
    EXPECT_EQ(s.bias_mm, 0.0);
    EXPECT_EQ(s.directional_variability_mm, 0.0);
    EXPECT_EQ(s.per_axis_variability_mm, 0.0);
}

TEST(SynthRegistration, InverseErrorTracksSeverity) {
    const auto g = small_params(0).shape;
    const LabelMap head = phantom_labels(small_params(0));
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const double half = inverse_consistency(synth_registration(0.5, seed, g).fwd,
                                                synth_registration(0.5, seed, g).inv, head);
        EXPECT_NEAR(half, 1.0, 0.1);
        double prev = -1.0;
        for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const auto r = synth_registration(s, seed, g);
            const double ic = inverse_consistency(r.fwd, r.inv, head);
            EXPECT_GE(ic, prev);
            prev = ic;
        }
    }
}

TEST(SynthRegistration, FieldScalesLinearly) {
    const auto g = small_params(0).shape;
    const auto full = deformation_stats(synth_registration(1.0, 5, g).field);
    const auto half = deformation_stats(synth_registration(0.5, 5, g).field);
    EXPECT_GT(full.bias_mm, 0.0);
    EXPECT_NEAR(half.bias_mm, 0.5 * full.bias_mm, 1e-5 * full.bias_mm);
    EXPECT_NEAR(half.per_axis_variability_mm, 0.5 * full.per_axis_variability_mm, 1e-5 * full.per_axis_variability_mm);
}

TEST(Cohort, TwoSubjectsLoadable) {
    TempDir dir;
    CohortOptions opt;
    opt.size = 24;
    const auto m = generate_cohort(2, 1, dir.path(), opt);
    ASSERT_EQ(m.subjects.size(), 2u);
    const auto back = read_manifest(dir / "manifest.json");
    EXPECT_EQ(back, m);
    for (const auto& s : back.subjects) {
        const auto row = process_subject(s);
        ASSERT_TRUE(row.targets.has_value());
        EXPECT_EQ(s.metadata["severity"].get<double>(), s.id == subject_id(0) ? 0.0 : 1.0);
    }
    EXPECT_EQ(process_subject(back.subjects[0]).targets->values, (std::array<double, 5>{1, 1, 1, 1, 1}));
}

TEST(Cohort, ByteIdenticalRegeneration) {
    TempDir a, b;
    CohortOptions opt;
    opt.size = 20;
    generate_cohort(3, 77, a.path(), opt);
    generate_cohort(3, 77, b.path(), opt, [](std::size_t n, auto&& fn) { parallel_for(n, 3, fn); });
    const auto ta = tree_contents(a.path()), tb = tree_contents(b.path());
    EXPECT_EQ(ta.size(), 1u + 3u * 6u);
    EXPECT_TRUE(ta == tb);
}

// Standard cohort checks, computed in memory.
class StandardCohort : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        constexpr std::size_t n = 40;
        severity_.clear();
        dice_.clear();
        ic_.clear();
        bias_.clear();
        std::vector<double> sev(n), ic(n), bias(n);
        std::vector<DiceScores> d(n);
        parallel_for(n, default_jobs(), [&](std::size_t i) {
            const GeneratedSubject s = make_cohort_subject(i, n, 7);
            sev[i] = s.record.metadata["severity"].get<double>();
            d[i] = measure_targets(s.computed, s.phantom.labels);
            ic[i] = inverse_consistency(s.registration.fwd, s.registration.inv, s.computed);
            bias[i] = deformation_stats(s.registration.field).bias_mm;
        });
        severity_ = sev;
        dice_ = d;
        ic_ = ic;
        bias_ = bias;
    }

    static inline std::vector<double> severity_;
    static inline std::vector<DiceScores> dice_;
    static inline std::vector<double> ic_;
    static inline std::vector<double> bias_;
};

TEST_F(StandardCohort, DiceNonIncreasingAcrossSeverityQuintiles) {
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        std::array<double, 5> q{};
        for (std::size_t i = 0; i < dice_.size(); ++i) q[i * 5 / dice_.size()] += dice_[i].values[t];
        for (std::size_t k = 1; k < 5; ++k) {
            EXPECT_LE(q[k], q[k - 1]) << tissue_name(kScoredTissues[t]) << " quintile " << k;
        }
    }
}

TEST_F(StandardCohort, RegistrationFeaturesTrackSeverity) {
    EXPECT_GT(pearson_r(ic_, severity_), 0.9);
    EXPECT_GT(pearson_r(bias_, severity_), 0.9);
}
