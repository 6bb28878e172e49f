#ifndef SEGQA_STATS_HPP
#define SEGQA_STATS_HPP

// Pearson correlation with two-sided t-test p-values, the tissue x feature
// correlation matrix, and the predicted-vs-actual evaluation summary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segqa/error.hpp"
#include "segqa/features.hpp"
#include "segqa/regressor.hpp"

namespace segqa {

class UndefinedCorrelation : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

inline constexpr double kSignificanceLevel = 0.05;

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("pearson_r: series lengths differ");
    if (x.size() < 3) throw ValidationError("pearson_r: needs at least 3 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const auto constant = [](std::span<const double> s) {
        return std::all_of(s.begin(), s.end(), [&](double v) { return v == s.front(); });
    };
    if (sxx == 0.0 || syy == 0.0 || constant(x) || constant(y)) {
        throw UndefinedCorrelation("pearson_r: correlation is undefined for a constant series");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double kTiny = 1e-300;
    constexpr double kEps = 1e-15;
    constexpr int kMaxIter = 100000;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double dm = m;
        const double m2 = 2.0 * dm;
        double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw ValidationError("incomplete beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// CDF of Student's t with `df` degrees of freedom.
inline double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("student_t_cdf: df must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return t >= 0.0 ? 1.0 - tail : tail;
}

// Two-sided p-value for H0: rho = 0 given sample correlation r over n points.
inline double pearson_p(double r, std::size_t n) {
    if (n < 3) throw ValidationError("pearson_p: needs n >= 3");
    if (!(std::abs(r) <= 1.0)) throw ValidationError("pearson_p: |r| must not exceed 1");
    if (std::abs(r) == 1.0) return 0.0;
    if (r == 0.0) return 1.0;
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    // Upper tail taken directly from the incomplete beta to avoid 1 - CDF cancellation.
    const double two_sided = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return std::clamp(two_sided, 0.0, 1.0);
}

struct CorrelationCell {
    double r = 0.0;
    double p = 1.0;
    bool significant = false;

    friend bool operator==(const CorrelationCell&, const CorrelationCell&) = default;
};

// nullopt when either series is constant.
inline std::optional<CorrelationCell> correlate(std::span<const double> x, std::span<const double> y) {
    try {
        CorrelationCell c;
        c.r = pearson_r(x, y);
        c.p = pearson_p(c.r, x.size());
        c.significant = c.p < kSignificanceLevel;
        return c;
    } catch (const UndefinedCorrelation&) {
        return std::nullopt;
    }
}

// Rows: scored tissues; columns: features. Signed r is stored.
struct CorrelationMatrix {
    std::array<std::array<std::optional<CorrelationCell>, kFeatureCount>, kScoredTissueCount> cells;
};

inline CorrelationMatrix correlation_matrix(std::span<const FeatureVector> features,
                                            std::span<const DiceScores> targets) {
    if (features.size() != targets.size()) throw ValidationError("correlation_matrix: row counts differ");
    if (features.size() < 3) throw ValidationError("correlation_matrix: needs at least 3 subjects");
    const std::size_t n = features.size();
    CorrelationMatrix m;
    std::vector<double> x(n), y(n);
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        for (std::size_t i = 0; i < n; ++i) y[i] = targets[i].values[t];
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            for (std::size_t i = 0; i < n; ++i) x[i] = features[i][f];
            m.cells[t][f] = correlate(x, y);
        }
    }
    return m;
}

struct TissueEvaluation {
    std::vector<std::pair<double, double>> pairs;  // (actual, predicted)
    std::optional<double> r;
    std::optional<double> p;
};

struct EvaluationReport {
    double mean_abs_diff = 0.0;
    double sd_abs_diff = 0.0;  // population SD
    std::optional<double> pearson_r;
    std::optional<double> pearson_p;
    std::array<TissueEvaluation, kScoredTissueCount> per_tissue;
};

// Pooled statistics run over every (subject, tissue) pair.
inline EvaluationReport summarize(const LooResult& loo) {
    if (loo.actual.empty() || loo.actual.size() != loo.predicted.size()) {
        throw ValidationError("summarize: empty or inconsistent prediction matrix");
    }
    EvaluationReport rep;
    std::vector<double> all_actual, all_pred, abs_diff;
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        std::vector<double> a, p;
        for (std::size_t i = 0; i < loo.actual.size(); ++i) {
            a.push_back(loo.actual[i].values[t]);
            p.push_back(loo.predicted[i].values[t]);
            rep.per_tissue[t].pairs.emplace_back(a.back(), p.back());
            abs_diff.push_back(std::abs(p.back() - a.back()));
        }
        if (a.size() >= 3) {
            if (auto c = correlate(a, p)) {
                rep.per_tissue[t].r = c->r;
                rep.per_tissue[t].p = c->p;
            }
        }
        all_actual.insert(all_actual.end(), a.begin(), a.end());
        all_pred.insert(all_pred.end(), p.begin(), p.end());
    }
    const double n = static_cast<double>(abs_diff.size());
    double sum = 0.0;
    for (double d : abs_diff) sum += d;
    rep.mean_abs_diff = sum / n;
    double ss = 0.0;
    for (double d : abs_diff) ss += (d - rep.mean_abs_diff) * (d - rep.mean_abs_diff);
    rep.sd_abs_diff = std::sqrt(ss / n);
    if (all_actual.size() >= 3) {
        if (auto c = correlate(all_actual, all_pred)) {
            rep.pearson_r = c->r;
            rep.pearson_p = c->p;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json matrix_to_json(const CorrelationMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m.cells) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : row) {
            if (c) {
                cells.push_back({{"r", c->r}, {"p", c->p}, {"significant", c->significant}});
            } else {
                cells.push_back(nullptr);
            }
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline nlohmann::json correlation_document(const CorrelationMatrix& m) {
    nlohmann::json doc;
    std::vector<std::string> tissues;
    for (TissueClass t : kScoredTissues) tissues.emplace_back(tissue_name(t));
    doc["tissues"] = tissues;
    doc["features"] = feature_names();
    doc["matrix"] = matrix_to_json(m);
    return doc;
}

inline nlohmann::json report_to_json(const EvaluationReport& rep, const std::vector<std::string>& ids,
                                     const std::optional<CorrelationMatrix>& matrix) {
    nlohmann::json doc;
    doc["pooled"] = {{"mae", rep.mean_abs_diff},
                     {"sd", rep.sd_abs_diff},
                     {"r", optional_number(rep.pearson_r)},
                     {"p", optional_number(rep.pearson_p)}};
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        const auto& te = rep.per_tissue[t];
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [a, p] : te.pairs) pairs.push_back({a, p});
        per[std::string(tissue_name(kScoredTissues[t]))] = {
            {"r", optional_number(te.r)}, {"p", optional_number(te.p)}, {"pairs", std::move(pairs)}};
    }
    doc["per_tissue"] = std::move(per);
    doc["subjects"] = ids;
    doc["features"] = feature_names();
    doc["matrix"] = matrix ? matrix_to_json(*matrix) : nlohmann::json::array();
    return doc;
}

}  // namespace segqa

#endif  // SEGQA_STATS_HPP
