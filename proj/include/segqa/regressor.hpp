#ifndef SEGQA_REGRESSOR_HPP
#define SEGQA_REGRESSOR_HPP

// Greedy variance-reduction regression trees (CART), one per scored tissue,
// and the leave-one-out protocol over a labelled cohort.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segqa/error.hpp"
#include "segqa/features.hpp"
#include "segqa/parallel.hpp"

namespace segqa {

struct TreeParams {
    static constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

    std::size_t max_depth = 5;
    std::size_t min_samples_leaf = 2;
    double min_variance_gain = 1e-12;
};

inline void validate(const TreeParams& p) {
    if (p.max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (p.min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
    if (!(p.min_variance_gain >= 0.0)) throw ValidationError("min_variance_gain must be >= 0");
}

// Internal nodes route x[feature] <= threshold to `left`, otherwise `right`.
struct TreeNode {
    static constexpr int kLeaf = -1;

    int feature = kLeaf;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double value = 0.0;

    bool is_leaf() const { return feature == kLeaf; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
  public:
    RegressionTree() : nodes_{TreeNode{}} {}
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.empty()) throw ValidationError("regression tree needs at least one node");
        for (const auto& n : nodes_) {
            if (n.is_leaf()) {
                if (!(n.value >= 0.0 && n.value <= 1.0)) throw ValidationError("leaf value outside [0, 1]");
            } else {
                if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= kFeatureCount) {
                    throw ValidationError("split feature index out of range");
                }
                if (n.left >= nodes_.size() || n.right >= nodes_.size()) {
                    throw ValidationError("split child index out of range");
                }
            }
        }
    }

    static RegressionTree leaf(double value) {
        TreeNode n;
        n.value = value;
        return RegressionTree({n});
    }

    // Node 0 is the root.
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    double predict(const FeatureVector& x) const {
        std::size_t at = 0;
        for (std::size_t hops = 0; hops <= nodes_.size(); ++hops) {
            const TreeNode& n = nodes_[at];
            if (n.is_leaf()) return n.value;
            at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        throw ValidationError("regression tree contains a cycle");
    }

    std::size_t depth() const { return depth_from(0); }
    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

  private:
    std::size_t depth_from(std::size_t at) const {
        const TreeNode& n = nodes_[at];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }

    std::vector<TreeNode> nodes_;
};

namespace detail {

// Every reduction below runs over a canonical ordering of the rows (sorted by
// value), so the fitted tree depends only on the multiset of rows and not on
// their input order.
class TreeBuilder {
  public:
    TreeBuilder(std::span<const FeatureVector> x, std::span<const double> y, const TreeParams& p)
        : x_(x), y_(y), params_(p) {}

    RegressionTree build() {
        std::vector<std::size_t> rows(x_.size());
        std::iota(rows.begin(), rows.end(), 0);
        grow(rows, 0);
        return RegressionTree(std::move(nodes_));
    }

  private:
    struct Split {
        int feature = TreeNode::kLeaf;
        double threshold = 0.0;
        double gain = -std::numeric_limits<double>::infinity();
    };

    std::size_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
        const std::size_t self = nodes_.size();
        nodes_.emplace_back();
        nodes_[self].value = leaf_value(rows);

        const bool depth_left = params_.max_depth == TreeParams::kUnlimitedDepth || depth < params_.max_depth;
        if (!depth_left || rows.size() < 2 * params_.min_samples_leaf) return self;
        const Split best = best_split(rows);
        if (best.feature == TreeNode::kLeaf || best.gain < params_.min_variance_gain) return self;

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) {
            (x_[r][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(r);
        }
        const std::size_t l = grow(left, depth + 1);
        const std::size_t rr = grow(right, depth + 1);
        TreeNode& n = nodes_[self];
        n.feature = best.feature;
        n.threshold = best.threshold;
        n.left = l;
        n.right = rr;
        return self;
    }

    double leaf_value(const std::vector<std::size_t>& rows) const {
        std::vector<double> ys;
        ys.reserve(rows.size());
        for (std::size_t r : rows) ys.push_back(y_[r]);
        std::sort(ys.begin(), ys.end());
        if (ys.front() == ys.back()) return ys.front();
        const double sum = std::accumulate(ys.begin(), ys.end(), 0.0);
        return std::clamp(sum / static_cast<double>(ys.size()), ys.front(), ys.back());
    }

    Split best_split(const std::vector<std::size_t>& rows) const {
        const std::size_t n = rows.size();
        const double dn = static_cast<double>(n);

        // Centre targets on the node mean to keep sum-of-squares differences well conditioned.
        std::vector<double> ys;
        for (std::size_t r : rows) ys.push_back(y_[r]);
        std::sort(ys.begin(), ys.end());
        const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / dn;
        double parent_sse = 0.0;
        for (double v : ys) parent_sse += (v - mean) * (v - mean);

        Split best;
        std::vector<std::pair<double, double>> sorted(n);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            for (std::size_t i = 0; i < n; ++i) sorted[i] = {x_[rows[i]][f], y_[rows[i]] - mean};
            std::sort(sorted.begin(), sorted.end());

            double total = 0.0, total_sq = 0.0;
            for (const auto& [xv, yv] : sorted) {
                total += yv;
                total_sq += yv * yv;
            }
            double sum_l = 0.0, sq_l = 0.0;
            for (std::size_t i = 1; i < n; ++i) {
                sum_l += sorted[i - 1].second;
                sq_l += sorted[i - 1].second * sorted[i - 1].second;
                if (!(sorted[i - 1].first < sorted[i].first)) continue;
                const std::size_t nl = i, nr = n - i;
                if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
                const double sum_r = total - sum_l;
                const double sq_r = total_sq - sq_l;
                const double sse_l = std::max(0.0, sq_l - sum_l * sum_l / static_cast<double>(nl));
                const double sse_r = std::max(0.0, sq_r - sum_r * sum_r / static_cast<double>(nr));
                const double gain = (parent_sse - sse_l - sse_r) / dn;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = midpoint(sorted[i - 1].first, sorted[i].first);
                }
            }
        }
        return best;
    }

    // Midpoint strictly below `hi`, so `lo` routes left and `hi` right.
    static double midpoint(double lo, double hi) {
        const double mid = lo + (hi - lo) / 2.0;
        return mid < hi ? mid : lo;
    }

    std::span<const FeatureVector> x_;
    std::span<const double> y_;
    TreeParams params_;
    std::vector<TreeNode> nodes_;
};

}  // namespace detail

inline RegressionTree fit_tree(std::span<const FeatureVector> x, std::span<const double> y, const TreeParams& p = {}) {
    validate(p);
    if (x.empty()) throw ValidationError("cannot fit a tree on an empty training set");
    if (x.size() != y.size()) throw ValidationError("feature and target counts differ");
    for (const auto& row : x) {
        for (double v : row.values) {
            if (std::isnan(v)) throw ValidationError("NaN feature value in training set");
        }
    }
    for (double v : y) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("training target outside [0, 1]");
    }
    return detail::TreeBuilder(x, y, p).build();
}

inline double predict(const RegressionTree& tree, const FeatureVector& x) { return tree.predict(x); }

// ---------------------------------------------------------------------------
// Serialization: {"feature": i, "threshold": t, "left": {...}, "right": {...}} or {"value": v}

inline nlohmann::json tree_to_json(const RegressionTree& tree, std::size_t at = 0) {
    const TreeNode& n = tree.nodes()[at];
    if (n.is_leaf()) return {{"value", n.value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", tree_to_json(tree, n.left)},
            {"right", tree_to_json(tree, n.right)}};
}

namespace detail {

inline std::size_t tree_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes, std::size_t depth) {
    if (depth > 10000) throw FormatError("model tree is too deep");
    if (!j.is_object()) throw FormatError("model tree node must be an object");
    const std::size_t self = nodes.size();
    nodes.emplace_back();
    if (j.contains("value")) {
        if (!j["value"].is_number()) throw FormatError("leaf 'value' must be a number");
        nodes[self].value = j["value"].get<double>();
        return self;
    }
    for (const char* key : {"feature", "threshold", "left", "right"}) {
        if (!j.contains(key)) throw FormatError(std::string("model split node lacks '") + key + "'");
    }
    if (!j["feature"].is_number_integer() || !j["threshold"].is_number()) {
        throw FormatError("model split node has non-numeric feature or threshold");
    }
    const int feature = j["feature"].get<int>();
    const double threshold = j["threshold"].get<double>();
    const std::size_t l = tree_from_json(j["left"], nodes, depth + 1);
    const std::size_t r = tree_from_json(j["right"], nodes, depth + 1);
    TreeNode& n = nodes[self];
    n.feature = feature;
    n.threshold = threshold;
    n.left = l;
    n.right = r;
    return self;
}

}  // namespace detail

inline RegressionTree tree_from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    detail::tree_from_json(j, nodes, 0);
    try {
        return RegressionTree(std::move(nodes));
    } catch (const ValidationError& e) {
        throw FormatError(std::string("invalid model tree: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// One tree per scored tissue.

struct TissueModelSet {
    static constexpr int kSchemaVersion = 1;

    std::array<RegressionTree, kScoredTissueCount> trees;

    const RegressionTree& operator[](TissueClass t) const { return trees[scored_index(t)]; }

    DiceScores predict(const FeatureVector& x) const {
        DiceScores d;
        for (std::size_t t = 0; t < kScoredTissueCount; ++t) d.values[t] = trees[t].predict(x);
        return d;
    }

    friend bool operator==(const TissueModelSet&, const TissueModelSet&) = default;
};

inline TissueModelSet fit_models(std::span<const FeatureVector> x, std::span<const DiceScores> y,
                                 const TreeParams& p = {}) {
    if (x.size() != y.size()) throw ValidationError("feature and target counts differ");
    TissueModelSet models;
    std::vector<double> column(y.size());
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        for (std::size_t i = 0; i < y.size(); ++i) column[i] = y[i].values[t];
        models.trees[t] = fit_tree(x, column, p);
    }
    return models;
}

inline nlohmann::json models_to_json(const TissueModelSet& m) {
    nlohmann::json j;
    j["schema_version"] = TissueModelSet::kSchemaVersion;
    j["feature_names"] = feature_names();
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        j[std::string(tissue_name(kScoredTissues[t]))] = tree_to_json(m.trees[t]);
    }
    return j;
}

inline TissueModelSet models_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("model document must be a JSON object");
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
        throw FormatError("model document lacks an integer schema_version");
    }
    const int version = j["schema_version"].get<int>();
    if (version != TissueModelSet::kSchemaVersion) {
        throw ValidationError("model schema_version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(TissueModelSet::kSchemaVersion) + ")");
    }
    if (j.contains("feature_names")) {
        const auto& names = feature_names();
        if (j["feature_names"] != nlohmann::json(names)) {
            throw ValidationError("model was trained on a different feature schema");
        }
    }
    TissueModelSet m;
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        const std::string key(tissue_name(kScoredTissues[t]));
        if (!j.contains(key)) throw FormatError("model document lacks a tree for '" + key + "'");
        m.trees[t] = tree_from_json(j[key]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Leave-one-out

struct LooResult {
    std::vector<std::string> ids;
    std::vector<DiceScores> actual;
    std::vector<DiceScores> predicted;
};

inline LooResult loo_evaluate(const std::vector<SubjectFeatures>& cohort, const TreeParams& p = {},
                              std::size_t jobs = 1) {
    validate(p);
    if (cohort.size() < 2) throw ValidationError("leave-one-out needs at least 2 subjects");
    std::vector<FeatureVector> x;
    std::vector<DiceScores> y;
    LooResult out;
    for (const auto& s : cohort) {
        if (!s.targets) throw ValidationError("subject '" + s.id + "' has no Dice targets");
        x.push_back(s.features);
        y.push_back(*s.targets);
        out.ids.push_back(s.id);
    }
    out.actual = y;
    out.predicted.resize(cohort.size());
    parallel_for(cohort.size(), jobs, [&](std::size_t held_out) {
        std::vector<FeatureVector> fx;
        std::vector<DiceScores> fy;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i == held_out) continue;
            fx.push_back(x[i]);
            fy.push_back(y[i]);
        }
        out.predicted[held_out] = fit_models(fx, fy, p).predict(x[held_out]);
    });
    return out;
}

}  // namespace segqa

#endif  // SEGQA_REGRESSOR_HPP
