// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "segqa/segqa.hpp"
#include "test_support.hpp"

using namespace segqa;
using segqa::test::TempDir;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

bool rel_close(double got, double want, double tol) {
    return std::abs(got - want) <= tol * std::max(std::abs(want), 1e-300) || got == want;
}

// ---------------------------------------------------------------------------
// Oracles

std::size_t flood_fill(const std::vector<char>& set, std::size_t n) {
    std::vector<char> seen(set.size(), 0);
    std::size_t count = 0;
    const auto idx = [n](long i, long j, long k) { return static_cast<std::size_t>(i + n * (j + n * k)); };
    for (std::size_t s = 0; s < set.size(); ++s) {
        if (!set[s] || seen[s]) continue;
        ++count;
        std::vector<std::size_t> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            const long ui = static_cast<long>(u % n), uj = static_cast<long>((u / n) % n), uk = static_cast<long>(u / (n * n));
            for (long dk = -1; dk <= 1; ++dk)
                for (long dj = -1; dj <= 1; ++dj)
                    for (long di = -1; di <= 1; ++di) {
                        const long i = ui + di, j = uj + dj, k = uk + dk;
                        const long m = static_cast<long>(n);
                        if (i < 0 || j < 0 || k < 0 || i >= m || j >= m || k >= m) continue;
                        const std::size_t w = idx(i, j, k);
                        if (set[w] && !seen[w]) {
                            seen[w] = 1;
                            stack.push_back(w);
                        }
                    }
        }
    }
    return count;
}

struct TwoPass {
    double bias, dir, axis;
};

TwoPass two_pass(const DeformationField& f) {
    const long double n = static_cast<long double>(f.size());
    long double mean[3] = {0, 0, 0};
    for (const auto& d : f.data())
        for (int c = 0; c < 3; ++c) mean[c] += d[c];
    for (auto& m : mean) m /= n;
    long double var[3] = {0, 0, 0};
    for (const auto& d : f.data())
        for (int c = 0; c < 3; ++c) var[c] += (d[c] - mean[c]) * (d[c] - mean[c]);
    const long double mm = (mean[0] + mean[1] + mean[2]) / 3;
    long double dv = 0;
    for (auto m : mean) dv += (m - mm) * (m - mm);
    TwoPass t;
    t.bias = static_cast<double>(std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]));
    t.dir = static_cast<double>(std::sqrt(dv / 3));
    t.axis = static_cast<double>((std::sqrt(var[0] / n) + std::sqrt(var[1] / n) + std::sqrt(var[2] / n)) / 3);
    return t;
}

// ---------------------------------------------------------------------------

Outcome criterion_dice() {
    Outcome o;
    const GridShape g = test::cube(16);
    const std::vector<TissueClass> codes = {TissueClass::Background, TissueClass::CSF, TissueClass::Skin,
                                            TissueClass::GM,         TissueClass::WM,  TissueClass::Skull,
                                            TissueClass::Tumor};
    for (std::uint64_t trial = 0; trial < 1000 && o.pass; ++trial) {
        Rng rng(derive_seed(101, trial));
        // Skewed label pools so some tissues are sparse or absent.
        std::vector<TissueClass> pool(codes.begin(), codes.begin() + 2 + static_cast<long>(rng.below(6)));
        const LabelMap a = test::random_labels(g, rng, pool);
        const LabelMap b = test::random_labels(g, rng, codes);
        for (TissueClass t : kScoredTissues) {
            std::uint64_t na = 0, nb = 0, both = 0;
            for (std::size_t v = 0; v < a.size(); ++v) {
                if (a[v] == t) ++na;
                if (b[v] == t) ++nb;
                if (a[v] == t && b[v] == t) ++both;
            }
            const double want = na + nb == 0 ? 1.0 : static_cast<double>(2 * both) / static_cast<double>(na + nb);
            const double got = dice(a, b, t);
            o.require(got == want, "trial " + std::to_string(trial) + " dice " + fmt(got) + " vs " + fmt(want));
        }
    }
    return o;
}

Outcome criterion_components() {
    Outcome o;
    constexpr std::size_t n = 8;
    const GridShape g = test::cube(n);
    for (std::uint64_t trial = 0; trial < 1000 && o.pass; ++trial) {
        Rng rng(derive_seed(202, trial));
        const double density = rng.uniform(0.02, 0.7);
        std::vector<char> set(g.voxel_count());
        std::vector<TissueClass> v(g.voxel_count());
        for (std::size_t i = 0; i < v.size(); ++i) {
            set[i] = rng.uniform() < density;
            v[i] = set[i] ? TissueClass::GM : TissueClass::CSF;
        }
        const std::size_t got = connected_components(LabelMap(g, v), TissueClass::GM);
        const std::size_t want = flood_fill(set, n);
        o.require(got == want, "trial " + std::to_string(trial) + ": " + std::to_string(got) + " vs " +
                                   std::to_string(want));
    }
    return o;
}

Outcome criterion_deformation() {
    Outcome o;
    const auto c = deformation_stats(DeformationField(GridShape{7, 5, 3, 1, 1, 1}, Vec3f{1, 2, 3}));
    o.require(rel_close(c.bias_mm, std::sqrt(14.0), 1e-9), "bias " + fmt(c.bias_mm));
    o.require(rel_close(c.directional_variability_mm, std::sqrt(2.0 / 3.0), 1e-9),
              "directional " + fmt(c.directional_variability_mm));
    o.require(c.per_axis_variability_mm == 0.0, "per-axis " + fmt(c.per_axis_variability_mm));
    for (std::uint64_t trial = 0; trial < 100 && o.pass; ++trial) {
        Rng rng(derive_seed(303, trial));
        const GridShape g{5 + rng.below(20), 5 + rng.below(20), 5 + rng.below(20), 1, 1, 1};
        const double offset[3] = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        std::vector<Vec3f> v(g.voxel_count());
        for (auto& d : v)
            for (int k = 0; k < 3; ++k) d[k] = static_cast<float>(offset[k] + rng.uniform(0.1, 3.0) * rng.gaussian());
        const DeformationField f(g, v);
        const auto s = deformation_stats(f);
        const auto w = two_pass(f);
        const std::string tag = "field " + std::to_string(trial) + ": ";
        o.require(rel_close(s.bias_mm, w.bias, 1e-9), tag + "bias");
        o.require(rel_close(s.directional_variability_mm, w.dir, 1e-9), tag + "directional");
        o.require(rel_close(s.per_axis_variability_mm, w.axis, 1e-9), tag + "per-axis");
    }
    return o;
}

Outcome criterion_inverse_consistency() {
    Outcome o;
    const GridShape g{20, 18, 16, 2.0, 2.5, 3.0};
    const LabelMap labels(g, TissueClass::WM);
    const AffineTransform fwd(Matrix4{{{1.05, 0.08, -0.03, 4.0}, {-0.06, 0.97, 0.11, -2.5}, {0.02, -0.09, 1.1, 7.0},
                                       {0, 0, 0, 1}}});
    const AffineTransform inv = fwd.inverse();
    const double zero = inverse_consistency(fwd, inv, labels);
    o.require(zero <= 1e-9, "exact pair gives " + fmt(zero));
    double prev = zero;
    const Vec3 dir = {0.48, -0.6, 0.64};  // unit length
    for (double mag : {1.0, 2.0, 4.0}) {
        const auto shifted = AffineTransform::translation({mag * dir[0], mag * dir[1], mag * dir[2]}).compose(inv);
        const double ic = inverse_consistency(fwd, shifted, labels);
        o.require(std::abs(ic - mag) <= 0.01 * mag, fmt(mag) + " mm shift gives " + fmt(ic));
        o.require(ic > prev, "not monotone at " + fmt(mag) + " mm");
        prev = ic;
    }
    return o;
}

Outcome criterion_regressor() {
    Outcome o;
    for (std::uint64_t trial = 0; trial < 20 && o.pass; ++trial) {
        Rng rng(derive_seed(505, trial));
        const std::size_t n = 20 + rng.below(80);
        std::vector<FeatureVector> x(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : x[i].values) v = rng.uniform(-100, 100);
            y[i] = rng.uniform();
        }
        const TreeParams p{TreeParams::kUnlimitedDepth, 1, 0.0};
        const auto t = fit_tree(x, y, p);
        for (std::size_t i = 0; i < n; ++i) {
            o.require(t.predict(x[i]) == y[i], "trial " + std::to_string(trial) + " row " + std::to_string(i));
        }
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);
        std::vector<FeatureVector> px;
        std::vector<double> py;
        for (std::size_t i : perm) {
            px.push_back(x[i]);
            py.push_back(y[i]);
        }
        for (const TreeParams q : {p, TreeParams{}}) {
            o.require(fit_tree(px, py, q).nodes() == fit_tree(x, y, q).nodes(),
                      "permutation changed tree in trial " + std::to_string(trial));
        }
    }
    return o;
}

Outcome criterion_statistics() {
    Outcome o;
    Rng rng(606);
    std::vector<double> x(50), up(50), down(50);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(-3, 7);
        up[i] = 2.5 * x[i] - 1.0;
        down[i] = -0.7 * x[i] + 4.0;
    }
    o.require(std::abs(pearson_r(x, up) - 1.0) <= 1e-12, "linear r " + fmt(pearson_r(x, up)));
    o.require(std::abs(pearson_r(x, down) + 1.0) <= 1e-12, "linear r " + fmt(pearson_r(x, down)));

    constexpr std::size_t n = 20;
    constexpr std::size_t draws = 1000000;
    std::vector<double> a(n), z(n);
    for (auto& v : a) v = rng.gaussian();
    for (auto& v : z) v = rng.gaussian();
    const auto standardize = [](std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0;
        for (auto& e : v) ss += (e - m) * (e - m);
        for (auto& e : v) e = (e - m) / std::sqrt(ss);
    };
    standardize(a);
    // Remove the component of z along a, then scale to unit norm.
    {
        const double m = std::accumulate(z.begin(), z.end(), 0.0) / n;
        for (auto& e : z) e -= m;
        const double proj = std::inner_product(a.begin(), a.end(), z.begin(), 0.0);
        for (std::size_t i = 0; i < n; ++i) z[i] -= proj * a[i];
        standardize(z);
    }
    for (int step = 1; step <= 9; ++step) {
        const double target = 0.1 * step;
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = target * a[i] + std::sqrt(1 - target * target) * z[i];
        const double r = pearson_r(a, b);
        // Unit-norm centred vectors: a permuted correlation is just the dot product.
        Rng prng(derive_seed(607, static_cast<std::uint64_t>(step)));
        std::vector<double> perm = b;
        std::size_t extreme = 0;
        for (std::size_t d = 0; d < draws; ++d) {
            for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[prng.below(i + 1)]);
            double dot = 0;
            for (std::size_t i = 0; i < n; ++i) dot += a[i] * perm[i];
            if (std::abs(dot) >= std::abs(r) - 1e-12) ++extreme;
        }
        const double oracle = static_cast<double>(extreme) / draws;
        const double p = pearson_p(r, n);
        o.require(std::abs(p - oracle) <= 0.01, "r=" + fmt(target) + " p " + fmt(p) + " vs permutation " + fmt(oracle));
    }
    const double p92 = pearson_p(0.92, 20);
    o.require(p92 < 0.001, "p(0.92, 20) = " + fmt(p92));
    return o;
}

// Cohort n=40 seed 7 at 64^3, shared by criteria 7, 8 and 10.
struct StandardRun {
    TempDir dir{"acc"};
    EvaluationOutput eval;
    double seconds = 0.0;
    std::string error;
};

StandardRun& standard_run() {
    static StandardRun r;
    static bool done = false;
    if (done) return r;
    done = true;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        PhantomCommand ph;
        ph.n = 40;
        ph.seed = 7;
        ph.out = r.dir / "cohort";
        ph.jobs = default_jobs();
        cmd_phantom(ph);
        EvaluateCommand ev;
        ev.manifest = r.dir / "cohort" / "manifest.json";
        ev.out = r.dir / "report.json";
        ev.svg_dir = r.dir / "svg";
        ev.jobs = default_jobs();
        r.eval = cmd_evaluate(ev);
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

Outcome criterion_end_to_end() {
    Outcome o;
    StandardRun& run = standard_run();
    if (!run.error.empty()) {
        o.require(false, run.error);
        return o;
    }
    const EvaluationReport& rep = run.eval.report;
    o.require(rep.pearson_r && *rep.pearson_r >= 0.8, "pooled r " + fmt(rep.pearson_r.value_or(NAN)));
    o.require(rep.mean_abs_diff <= 0.08, "mean abs diff " + fmt(rep.mean_abs_diff));
    int good = 0;
    std::string per;
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        const auto& r = rep.per_tissue[t].r;
        good += r && *r >= 0.6;
        per += std::string(tissue_name(kScoredTissues[t])) + "=" + fmt(r.value_or(NAN)) + " ";
    }
    o.require(good >= 4, "per-tissue r: " + per);
    o.require(run.seconds < 60.0, "phantom + evaluate took " + fmt(run.seconds) + " s");
    o.detail = o.pass ? "r=" + fmt(*rep.pearson_r) + " mad=" + fmt(rep.mean_abs_diff) + " sd=" +
                            fmt(rep.sd_abs_diff) + " " + per + fmt(run.seconds) + " s"
                      : o.detail;
    return o;
}

Outcome criterion_correlation_matrix() {
    Outcome o;
    StandardRun& run = standard_run();
    if (!run.error.empty() || !run.eval.matrix) {
        o.require(false, run.error.empty() ? "no correlation matrix" : run.error);
        return o;
    }
    std::string cells;
    for (TissueClass t : {TissueClass::GM, TissueClass::WM}) {
        for (std::size_t f : {std::size_t{0}, std::size_t{1}}) {
            const auto& cell = run.eval.matrix->cells[scored_index(t)][f];
            const std::string name = std::string(tissue_name(t)) + "/" + feature_names()[f];
            o.require(cell && cell->p < 0.05, name + " p=" + fmt(cell ? cell->p : NAN));
            if (cell) cells += name + " r=" + fmt(cell->r) + " p=" + fmt(cell->p) + " ";
        }
    }
    if (o.pass) o.detail = cells;
    return o;
}

template <typename T>
bool bit_equal(const Volume<T>& a, const Volume<T>& b) {
    return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

// Reverses every multi-byte numeric header field and each payload element.
std::vector<unsigned char> byte_swapped(std::vector<unsigned char> bytes, std::size_t element_width) {
    struct Field {
        std::size_t offset, width, count;
    };
    const Field fields[] = {{0, 4, 1},   {32, 4, 1},  {36, 2, 1},  {40, 2, 8},   {56, 4, 3},  {68, 2, 4},
                            {76, 4, 8},  {108, 4, 3}, {120, 2, 1}, {124, 4, 4},  {140, 4, 2}, {252, 2, 2},
                            {256, 4, 6}, {280, 4, 12}};
    const auto flip = [&](std::size_t at, std::size_t w) { std::reverse(bytes.begin() + at, bytes.begin() + at + w); };
    for (const Field& f : fields)
        for (std::size_t i = 0; i < f.count; ++i) flip(f.offset + i * f.width, f.width);
    if (element_width > 1) {
        for (std::size_t at = 352; at + element_width <= bytes.size(); at += element_width) flip(at, element_width);
    }
    return bytes;
}

Outcome criterion_nifti() {
    Outcome o;
    TempDir dir("nii");
    Rng rng(909);
    const GridShape g{11, 7, 5, 1.5, 0.75, 2.25};
    std::vector<float> sv(g.voxel_count());
    for (auto& v : sv) {
        // Raw bit patterns cover denormals and signed zero; non-finite ones are redrawn.
        do {
            const auto bits = static_cast<std::uint32_t>(rng.next());
            std::memcpy(&v, &bits, sizeof v);
        } while (!std::isfinite(v));
    }
    sv[0] = -0.0f;
    const ScalarVolume scalar(g, sv);
    const LabelMap labels = test::random_labels(
        g, rng, {TissueClass::Background, TissueClass::CSF, TissueClass::Skin, TissueClass::GM, TissueClass::WM,
                 TissueClass::Skull, TissueClass::Tumor});
    std::vector<Vec3f> fv(g.voxel_count());
    for (auto& d : fv)
        for (auto& c : d) c = static_cast<float>(rng.gaussian() * 3.0);
    const DeformationField field(g, fv);

    for (const char* ext : {".nii", ".nii.gz"}) {
        write_nifti(scalar, dir / (std::string("s") + ext));
        write_nifti(labels, dir / (std::string("l") + ext));
        write_nifti(field, dir / (std::string("f") + ext));
        o.require(bit_equal(read_scalar_volume(dir / (std::string("s") + ext)), scalar), std::string("scalar ") + ext);
        o.require(bit_equal(read_label_map(dir / (std::string("l") + ext)), labels), std::string("labels ") + ext);
        o.require(bit_equal(read_deformation_field(dir / (std::string("f") + ext)), field), std::string("field ") + ext);
    }

    const auto swapped_copy = [&](const std::string& name, std::size_t width) {
        const auto native = test::file_bytes(dir / (name + ".nii"));
        const auto swapped = byte_swapped(native, width);
        o.require(swapped[0] == 0 && swapped[3] == 0x5c && swapped != native, name + " fixture not swapped");
        const auto out = dir / (name + "_be.nii");
        std::ofstream(out, std::ios::binary)
            .write(reinterpret_cast<const char*>(swapped.data()), static_cast<std::streamsize>(swapped.size()));
        return out;
    };
    o.require(bit_equal(read_scalar_volume(swapped_copy("s", 4)), scalar), "byte-swapped scalar");
    o.require(bit_equal(read_label_map(swapped_copy("l", 1)), labels), "byte-swapped labels");
    o.require(bit_equal(read_deformation_field(swapped_copy("f", 4)), field), "byte-swapped field");
    return o;
}

std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = test::file_text(e.path());
    }
    return out;
}

Outcome criterion_determinism() {
    Outcome o;
    StandardRun& first = standard_run();
    if (!first.error.empty()) {
        o.require(false, first.error);
        return o;
    }
    // Second run with the same flags as the shared one.
    TempDir again("acc2");
    PhantomCommand ph;
    ph.n = 40;
    ph.seed = 7;
    ph.out = again / "cohort";
    ph.jobs = default_jobs();
    cmd_phantom(ph);
    o.require(tree_contents(first.dir / "cohort") == tree_contents(again / "cohort"), "phantom cohorts differ");

    for (const std::filesystem::path& root : {first.dir.path(), again.path()}) {
        FeaturesCommand fc;
        fc.manifest = root / "cohort" / "manifest.json";
        fc.out = root / "features.csv";
        fc.jobs = default_jobs();
        cmd_features(fc);
    }
    o.require(test::file_text(first.dir / "features.csv") == test::file_text(again / "features.csv"),
              "feature CSVs differ");

    EvaluateCommand ev;
    ev.manifest = again / "cohort" / "manifest.json";
    ev.out = again / "report.json";
    ev.svg_dir = again / "svg";
    ev.jobs = default_jobs();
    cmd_evaluate(ev);
    o.require(test::file_text(first.dir / "report.json") == test::file_text(again / "report.json"), "reports differ");
    o.require(tree_contents(first.dir / "svg") == tree_contents(again / "svg"), "SVGs differ");
    o.require(tree_contents(again / "svg").size() == 2, "expected scatter and matrix SVGs");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Dice equals voxel-counting oracle on 1000 random 16^3 pairs", criterion_dice},
        {"26-connected components equal flood fill on 1000 random 8^3 masks", criterion_components},
        {"deformation statistics: closed form and two-pass oracle", criterion_deformation},
        {"inverse consistency: exact pair and 1/2/4 mm translations", criterion_inverse_consistency},
        {"regression tree exact fit and permutation invariance", criterion_regressor},
        {"Pearson r and p: linear, permutation oracle, p(0.92,20)", criterion_statistics},
        {"end-to-end evaluation on the n=40 seed 7 cohort", criterion_end_to_end},
        {"registration features correlate with GM/WM Dice", criterion_correlation_matrix},
        {"NIfTI bit-exact round-trip including byte-swapped files", criterion_nifti},
        {"phantom, features and evaluate are byte-identical across runs", criterion_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Criteria 1 and 2 carry a runtime bound.
        if ((i == 0 || i == 1) && s >= 10.0) {
            o.pass = false;
            o.detail = "took " + fmt(s) + " s";
        }
        failures += !o.pass;
        std::printf("[%s] criterion %zu: %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), s, o.detail.empty() ? "" : " -- ", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
