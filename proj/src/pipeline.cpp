#include "famf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <set>

#include "famf/error.hpp"
#include "famf/random.hpp"

namespace famf {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kClfZeroVariance = 1e-3;

std::size_t trait_count(const SemStructure& s) {
    return s.method_enabled ? s.latents.size() - 1 : s.latents.size();
}

// Free regression cells among traits, as (outcome, predictor, param).
std::vector<std::tuple<std::size_t, std::size_t, int>> free_regressions(const SemStructure& s) {
    std::vector<std::tuple<std::size_t, std::size_t, int>> out;
    const std::size_t q = trait_count(s);
    for (std::size_t r = 0; r < q; ++r)
        for (std::size_t c = 0; c < q; ++c)
            if (s.regressions(r, c).is_free()) out.emplace_back(r, c, s.regressions(r, c).param);
    return out;
}

double delta_method_se(const SemSolution& sol, const std::function<double(const Eigen::VectorXd&)>& g) {
    if (!sol.acov.allFinite()) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::Index n = sol.estimates.size();
    Eigen::VectorXd grad(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(sol.estimates(i)));
        Eigen::VectorXd xp = sol.estimates, xm = sol.estimates;
        xp(i) += h;
        xm(i) -= h;
        grad(i) = (g(xp) - g(xm)) / (2.0 * h);
    }
    return std::sqrt(std::max(grad.dot(sol.acov * grad), 0.0));
}

std::vector<double> path_values(const SemSolution& sol) {
    std::vector<double> out;
    for (const auto& p : key_paths(sol)) out.push_back(p.estimate);
    return out;
}

PathCell refit_paths(const MomentSummary& moments, const ModelSpec& spec, const std::vector<std::string>& items,
                     const VariantSpec& variant, const FitOptions& options) {
    PathCell cell;
    try {
        SemSolution sol = fit_variant(moments, spec, items, variant, options);
        if (!sol.converged) {
            cell.error = "non-convergence: " + sol.message;
            return cell;
        }
        cell.paths = key_paths(sol);
        cell.weights = variant.weights;
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

std::string VariantSpec::name() const {
    switch (kind) {
        case VariantKind::baseline: return "baseline";
        case VariantKind::famf: return "famf";
        case VariantKind::clf: return "clf";
        case VariantKind::cu: return "cu";
        case VariantKind::famf_cu: return "famf_cu";
    }
    return "unknown";
}

SemStructure variant_structure(const ModelSpec& spec, const std::vector<std::string>& items, const VariantSpec& v) {
    const std::size_t k = items.size();
    MethodFactor method = MethodFactor::none();
    if (v.kind == VariantKind::famf || v.kind == VariantKind::famf_cu) {
        if (static_cast<std::size_t>(v.weights.size()) != k) {
            throw InputError("weight/item misalignment: " + std::to_string(v.weights.size()) + " weights for " +
                             std::to_string(k) + " items");
        }
        const double ss = v.weights.squaredNorm();
        if (std::abs(ss - static_cast<double>(k)) > 1e-6 * static_cast<double>(k))
            throw InputError("FAMF weights must satisfy sum(w^2) = k");
        method = MethodFactor::fixed(v.weights);
    } else if (v.kind == VariantKind::clf) {
        method = MethodFactor::equal();
    }
    SemStructure s = build_structure(spec, items, method);
    if (v.kind == VariantKind::cu || v.kind == VariantKind::famf_cu) {
        for (const auto& [i, j] : v.pairs) s = free_residual_covariance(s, i, j);
    }
    return s;
}

SemSolution fit_variant(const MomentSummary& moments, const ModelSpec& spec, const std::vector<std::string>& items,
                        const VariantSpec& variant, const FitOptions& options) {
    SemSolution sol = fit_model(moments, variant_structure(spec, items, variant), options);
    if (variant.kind == VariantKind::clf) {
        auto idx = sol.structure.param_index(kMethodLatent + "=~all");
        const double c = std::abs(sol.estimates(static_cast<Eigen::Index>(*idx)));
        if (c * c < kClfZeroVariance) sol.warnings.push_back("no common variance detected (CLF loading at the 0 bound)");
    }
    return sol;
}

bool reports_correlations(const SemStructure& s) { return free_regressions(s).empty(); }

std::vector<PathEstimate> key_paths(const SemSolution& sol) {
    const SemStructure& s = sol.structure;
    std::vector<PathEstimate> out;
    auto regs = free_regressions(s);
    if (!regs.empty()) {
        for (const auto& [r, c, p] : regs) {
            out.push_back({s.latents[r] + "~" + s.latents[c], sol.estimates(p), sol.se(p)});
        }
        return out;
    }
    const std::size_t q = trait_count(s);
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a + 1; b < q; ++b) {
            auto corr = [&](const Eigen::VectorXd& x) {
                Eigen::MatrixXd C = latent_covariance(fill_matrices(s, x));
                const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
                return C(ia, ib) / std::sqrt(C(ia, ia) * C(ib, ib));
            };
            out.push_back({s.latents[a] + "~~" + s.latents[b], corr(sol.estimates), delta_method_se(sol, corr)});
        }
    return out;
}

DeltaBetaPanel effect_stability(const SemSolution& before, const SemSolution& after, const ResponseMatrix& data,
                                const ModelSpec& spec, const VariantSpec& before_variant,
                                const VariantSpec& after_variant, const StabilityOptions& options) {
    DeltaBetaPanel panel;
    panel.correlations = reports_correlations(before.structure);
    auto pb = key_paths(before);
    auto pa = key_paths(after);
    if (pb.size() != pa.size()) throw InputError("before/after solutions track different paths");
    for (std::size_t i = 0; i < pb.size(); ++i) {
        if (pb[i].label != pa[i].label) throw InputError("before/after path labels differ");
        DeltaBetaRow row;
        row.path = pb[i].label;
        row.before = pb[i].estimate;
        row.after = pa[i].estimate;
        row.delta = row.after - row.before;
        row.se_before = pb[i].se;
        row.se_after = pa[i].se;
        row.wald_before = {row.before - kZ975 * row.se_before, row.before + kZ975 * row.se_before};
        row.wald_after = {row.after - kZ975 * row.se_after, row.after + kZ975 * row.se_after};
        row.ci_lo = row.ci_hi = std::numeric_limits<double>::quiet_NaN();
        panel.rows.push_back(row);
    }
    if (!options.bootstrap || panel.rows.empty()) return panel;
    if (options.replicates < 1) throw InputError("bootstrap replicate count must be positive");

    panel.bootstrap = true;
    panel.replicates = options.replicates;
    const std::size_t reps = static_cast<std::size_t>(options.replicates);
    const Eigen::Index n = data.values.rows();
    std::vector<std::optional<std::vector<double>>> deltas(reps);
    FitOptions fo = options.fit;
    fo.compute_se = false;
    fo.compute_fit_indices = false;

    parallel_for(reps, [&](std::size_t b) {
        try {
            auto engine = make_stream(options.seed, {static_cast<std::uint64_t>(b)});
            ResponseMatrix resample;
            resample.item_names = data.item_names;
            resample.values.resize(n, data.values.cols());
            for (Eigen::Index r = 0; r < n; ++r)
                resample.values.row(r) = data.values.row(
                    static_cast<Eigen::Index>(uniform_index(engine, static_cast<std::size_t>(n))));
            MomentSummary mom = sample_moments(resample);
            FitOptions fb = fo, fa = fo;
            fb.start = before.estimates;
            fa.start = after.estimates;
            SemSolution sb = fit_variant(mom, spec, before.structure.items, before_variant, fb);
            SemSolution sa = fit_variant(mom, spec, after.structure.items, after_variant, fa);
            if (!sb.converged || !sa.converged) return;
            auto vb = path_values(sb);
            auto va = path_values(sa);
            std::vector<double> d(vb.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = va[i] - vb[i];
            deltas[b] = std::move(d);
        } catch (const std::exception&) {
            // counted as a failed replicate below
        }
    });

    for (const auto& d : deltas)
        if (!d) ++panel.failures;
    panel.unreliable = panel.failures > options.replicates / 10;
    for (std::size_t i = 0; i < panel.rows.size(); ++i) {
        std::vector<double> col;
        for (const auto& d : deltas)
            if (d) col.push_back((*d)[i]);
        panel.rows[i].ci_lo = quantile(col, 0.025);
        panel.rows[i].ci_hi = quantile(col, 0.975);
    }
    return panel;
}

RobustnessReport robustness_suite(const MomentSummary& moments, const ModelSpec& spec, const ItemKey& key,
                                  const FeatureMatrix& features, const SemSolution& baseline,
                                  const CalibrationResult& calibration, const RobustnessOptions& options) {
    RobustnessReport rep;
    const auto items = key.names();

    for (const auto& pt : calibration.sweep) {
        LambdaProfileRow row;
        row.lambda = pt.lambda;
        if (!pt.feasible) {
            row.cell.error = pt.note.empty() ? "infeasible lambda" : pt.note;
        } else {
            row.cell = refit_paths(moments, spec, items, VariantSpec::famf(pt.weights), options.fit);
        }
        rep.lambda_profile.push_back(std::move(row));
    }

    std::optional<Eigen::Index> orient;
    if (options.calibration.orient_feature) orient = features.index_of(*options.calibration.orient_feature);
    for (const auto& name : features.feature_names) {
        LofoRow row;
        row.omitted = name;
        try {
            FeatureMatrix reduced = drop_feature(features, name);
            std::optional<Eigen::Index> o;
            if (orient && options.calibration.orient_feature != name) o = reduced.index_of(*options.calibration.orient_feature);
            RidgeFit fit = ridge_fit(reduced.Z, calibration.m, calibration.lambda);
            FinalWeights fw = finalize_weights(reduced.Z, fit.gamma, calibration.m, o);
            row.cell = refit_paths(moments, spec, items, VariantSpec::famf(fw.w), options.fit);
        } catch (const std::exception& e) {
            row.cell.error = e.what();
        }
        rep.lofo.push_back(std::move(row));
    }

    rep.clf = refit_paths(moments, spec, items, VariantSpec::clf(), options.fit);

    const auto scales = key.scales();
    rep.cross_scale_applicable = std::set<std::string>(scales.begin(), scales.end()).size() >= 2;
    if (rep.cross_scale_applicable) {
        try {
            CalibrationOptions co = options.calibration;
            co.cross_scale_only = true;
            co.bootstrap = 0;
            CalibrationResult cross = calibrate(baseline.residual_correlations, scales, features, co);
            rep.cross_scale = refit_paths(moments, spec, items, VariantSpec::famf(cross.w), options.fit);
        } catch (const std::exception& e) {
            rep.cross_scale.error = e.what();
        }
    } else {
        rep.cross_scale.error = "not applicable (single scale)";
    }
    return rep;
}

}  // namespace famf
