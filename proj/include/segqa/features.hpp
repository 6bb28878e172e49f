#ifndef SEGQA_FEATURES_HPP
#define SEGQA_FEATURES_HPP

// The fixed 20-column quality feature vector and its extraction from one
// subject's image, computed segmentation and registration outputs.
//
// Column order (frozen; CSV headers and model files depend on it):
//   0 inv_consistency_mm   1 def_bias_mm   2 def_dir_var_mm   3 def_axis_var_mm
//   4 shortest_axis_mm
//   5.. for each tissue in [csf, skin, gm, wm, skull]: snr, vol_mm3, ncc

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segqa/affine_io.hpp"
#include "segqa/error.hpp"
#include "segqa/grid.hpp"
#include "segqa/manifest.hpp"
#include "segqa/morphometry.hpp"
#include "segqa/nifti.hpp"
#include "segqa/registration_features.hpp"

namespace segqa {

inline constexpr std::size_t kFeatureCount = 20;
inline constexpr std::size_t kFirstTissueFeature = 5;
inline constexpr std::size_t kFeaturesPerTissue = 3;

enum class TissueFeature : std::size_t { snr = 0, volume = 1, components = 2 };

inline constexpr std::size_t tissue_feature_index(std::size_t scored, TissueFeature f) {
    return kFirstTissueFeature + kFeaturesPerTissue * scored + static_cast<std::size_t>(f);
}

inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = [] {
        std::array<std::string, kFeatureCount> n;
        n[0] = "inv_consistency_mm";
        n[1] = "def_bias_mm";
        n[2] = "def_dir_var_mm";
        n[3] = "def_axis_var_mm";
        n[4] = "shortest_axis_mm";
        for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
            const std::string tissue(tissue_name(kScoredTissues[t]));
            n[tissue_feature_index(t, TissueFeature::snr)] = "snr_" + tissue;
            n[tissue_feature_index(t, TissueFeature::volume)] = "vol_mm3_" + tissue;
            n[tissue_feature_index(t, TissueFeature::components)] = "ncc_" + tissue;
        }
        return n;
    }();
    return names;
}

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline void validate(const FeatureVector& f) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!std::isfinite(f[i])) throw ValidationError("feature '" + feature_names()[i] + "' is not finite");
    }
}

// Everything feature extraction reads for one subject. The validated
// segmentation is deliberately absent: it only ever feeds targets.
struct SubjectInputs {
    ScalarVolume mri;
    LabelMap computed;
    AffineTransform affine_fwd;
    AffineTransform affine_inv;
    DeformationField deformation;
};

namespace detail {

template <typename Fn>
auto load_labelled(const std::string& subject, const char* what, Fn&& load) {
    try {
        return load();
    } catch (const IoError& e) {
        throw IoError("subject '" + subject + "' " + what + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError("subject '" + subject + "' " + what + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("subject '" + subject + "' " + what + ": " + e.what());
    }
}

}  // namespace detail

inline SubjectInputs load_subject(const SubjectRecord& s) {
    return SubjectInputs{
        detail::load_labelled(s.id, "mri", [&] { return read_scalar_volume(s.mri); }),
        detail::load_labelled(s.id, "computed_seg", [&] { return read_label_map(s.computed_seg); }),
        detail::load_labelled(s.id, "affine_fwd", [&] { return read_affine(s.affine_fwd); }),
        detail::load_labelled(s.id, "affine_inv", [&] { return read_affine(s.affine_inv); }),
        detail::load_labelled(s.id, "deformation", [&] { return read_deformation_field(s.deformation); }),
    };
}

inline LabelMap load_validated(const SubjectRecord& s) {
    if (!s.validated_seg) throw ValidationError("subject '" + s.id + "' has no validated segmentation");
    return detail::load_labelled(s.id, "validated_seg", [&] { return read_label_map(*s.validated_seg); });
}

inline FeatureVector extract_features(const SubjectInputs& in) {
    require_same_grid(in.mri.shape(), in.computed.shape(), "mri vs computed segmentation");
    FeatureVector f;
    f[0] = inverse_consistency(in.affine_fwd, in.affine_inv, in.computed);
    const DeformationStats ds = deformation_stats(in.deformation);
    f[1] = ds.bias_mm;
    f[2] = ds.directional_variability_mm;
    f[3] = ds.per_axis_variability_mm;
    f[4] = shortest_axis_length(in.computed);
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        const TissueClass tissue = kScoredTissues[t];
        f[tissue_feature_index(t, TissueFeature::snr)] = snr(in.mri, in.computed, tissue);
        f[tissue_feature_index(t, TissueFeature::volume)] = tissue_volume(in.computed, tissue);
        f[tissue_feature_index(t, TissueFeature::components)] =
            static_cast<double>(connected_components(in.computed, tissue));
    }
    validate(f);
    return f;
}

inline DiceScores measure_targets(const LabelMap& computed, const LabelMap& validated) {
    require_same_grid(computed.shape(), validated.shape(), "computed vs validated segmentation");
    DiceScores d;
    for (TissueClass t : kScoredTissues) d[t] = dice(computed, validated, t);
    return d;
}

// One subject's features plus Dice targets when a validated map exists.
struct SubjectFeatures {
    std::string id;
    FeatureVector features;
    std::optional<DiceScores> targets;

    friend bool operator==(const SubjectFeatures&, const SubjectFeatures&) = default;
};

inline SubjectFeatures process_subject(const SubjectRecord& s) {
    const SubjectInputs inputs = load_subject(s);
    SubjectFeatures out;
    out.id = s.id;
    std::optional<LabelMap> validated;
    if (s.validated_seg) validated = load_validated(s);
    try {
        out.features = extract_features(inputs);
        if (validated) out.targets = measure_targets(inputs.computed, *validated);
    } catch (const ValidationError& e) {
        throw ValidationError("subject '" + s.id + "': " + e.what());
    }
    return out;
}

}  // namespace segqa

#endif  // SEGQA_FEATURES_HPP
