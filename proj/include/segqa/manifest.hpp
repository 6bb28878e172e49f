#ifndef SEGQA_MANIFEST_HPP
#define SEGQA_MANIFEST_HPP

// Cohort manifests: a JSON list of subjects with the paths of their inputs.
//
//   {"subjects": [{"id": "s01", "mri": "s01/t1.nii.gz", "computed_seg": ...,
//                  "validated_seg": null, "affine_fwd": ..., "affine_inv": ...,
//                  "deformation": ..., "metadata": {...}}]}
//
// Relative paths are resolved against the manifest's directory on read and
// written relative to it where possible.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segqa/error.hpp"

namespace segqa {

struct SubjectRecord {
    std::string id;
    std::filesystem::path mri;
    std::filesystem::path computed_seg;
    std::optional<std::filesystem::path> validated_seg;
    std::filesystem::path affine_fwd;
    std::filesystem::path affine_inv;
    std::filesystem::path deformation;
    // Free-form per-subject annotations (the phantom generator records severity and seed).
    nlohmann::json metadata = nlohmann::json::object();

    friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

struct CohortManifest {
    std::vector<SubjectRecord> subjects;

    friend bool operator==(const CohortManifest&, const CohortManifest&) = default;
};

// Evaluation workflows need at least one subject; bare schema checks do not.
inline void require_nonempty(const CohortManifest& m) {
    if (m.subjects.empty()) throw ValidationError("manifest lists no subjects");
}

inline void validate(const CohortManifest& m) {
    std::set<std::string> seen;
    for (const auto& s : m.subjects) {
        if (s.id.empty()) throw ValidationError("manifest subject with empty id");
        if (!seen.insert(s.id).second) throw ValidationError("duplicate subject id '" + s.id + "'");
    }
}

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

inline std::string relativize(const std::filesystem::path& base, const std::filesystem::path& p) {
    const auto abs_base = std::filesystem::absolute(base).lexically_normal();
    const auto abs_p = std::filesystem::absolute(p).lexically_normal();
    auto rel = abs_p.lexically_relative(abs_base);
    if (rel.empty()) return abs_p.generic_string();
    return rel.generic_string();
}

inline std::string required_string(const nlohmann::json& subject, const char* key, std::size_t index) {
    if (!subject.contains(key)) {
        throw FormatError("manifest subject #" + std::to_string(index) + " lacks required key '" + key + "'");
    }
    if (!subject[key].is_string()) {
        throw FormatError("manifest subject #" + std::to_string(index) + ": '" + key + "' must be a string");
    }
    return subject[key].get<std::string>();
}

}  // namespace detail

inline CohortManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("subjects") || !doc["subjects"].is_array()) {
        throw FormatError("manifest must be an object with a 'subjects' array");
    }
    CohortManifest m;
    std::size_t index = 0;
    for (const auto& js : doc["subjects"]) {
        if (!js.is_object()) throw FormatError("manifest subject #" + std::to_string(index) + " is not an object");
        SubjectRecord s;
        s.id = detail::required_string(js, "id", index);
        s.mri = detail::resolve(base_dir, detail::required_string(js, "mri", index));
        s.computed_seg = detail::resolve(base_dir, detail::required_string(js, "computed_seg", index));
        s.affine_fwd = detail::resolve(base_dir, detail::required_string(js, "affine_fwd", index));
        s.affine_inv = detail::resolve(base_dir, detail::required_string(js, "affine_inv", index));
        s.deformation = detail::resolve(base_dir, detail::required_string(js, "deformation", index));
        if (js.contains("validated_seg") && !js["validated_seg"].is_null()) {
            s.validated_seg = detail::resolve(base_dir, detail::required_string(js, "validated_seg", index));
        }
        if (js.contains("metadata")) {
            if (!js["metadata"].is_object()) throw FormatError("manifest 'metadata' must be an object");
            s.metadata = js["metadata"];
        }
        m.subjects.push_back(std::move(s));
        ++index;
    }
    validate(m);
    return m;
}

inline CohortManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), std::filesystem::absolute(path).parent_path());
}

inline std::string format_manifest(const CohortManifest& m, const std::filesystem::path& base_dir) {
    validate(m);
    nlohmann::json subjects = nlohmann::json::array();
    for (const auto& s : m.subjects) {
        nlohmann::json js;
        js["id"] = s.id;
        js["mri"] = detail::relativize(base_dir, s.mri);
        js["computed_seg"] = detail::relativize(base_dir, s.computed_seg);
        js["validated_seg"] = s.validated_seg ? nlohmann::json(detail::relativize(base_dir, *s.validated_seg))
                                              : nlohmann::json(nullptr);
        js["affine_fwd"] = detail::relativize(base_dir, s.affine_fwd);
        js["affine_inv"] = detail::relativize(base_dir, s.affine_inv);
        js["deformation"] = detail::relativize(base_dir, s.deformation);
        if (!s.metadata.empty()) js["metadata"] = s.metadata;
        subjects.push_back(std::move(js));
    }
    nlohmann::json doc;
    doc["subjects"] = std::move(subjects);
    return doc.dump(2) + "\n";
}

inline void write_manifest(const CohortManifest& m, const std::filesystem::path& path) {
    const std::string text = format_manifest(m, std::filesystem::absolute(path).parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create manifest " + path.string());
    out << text;
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace segqa

#endif  // SEGQA_MANIFEST_HPP
