#include "famf/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "famf/error.hpp"
#include "famf/internal/csv.hpp"

namespace famf {

namespace {

const char* const kDash = "\xE2\x80\x94";

std::string fmt(double v, int digits = 3) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    // avoid "-0.000"
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string ci(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return kDash;
    return "[" + fmt(lo) + ", " + fmt(hi) + "]";
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string grid_text(const std::vector<double>& g) {
    std::vector<std::string> parts;
    for (double v : g) {
        std::ostringstream os;
        os << v;
        parts.push_back(os.str());
    }
    return "{" + join(parts, ", ") + "}";
}

nlohmann::ordered_json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

void row(std::ostringstream& os, const std::vector<std::string>& cells) { os << "| " << join(cells, " | ") << " |\n"; }

void header(std::ostringstream& os, const std::vector<std::string>& cells) {
    row(os, cells);
    std::vector<std::string> rule(cells.size(), "---");
    row(os, rule);
}

bool excludes_zero(const Interval& iv) { return std::isfinite(iv.lo) && std::isfinite(iv.hi) && (iv.lo > 0 || iv.hi < 0); }

std::string inference(const DeltaBetaRow& r) {
    const bool sig_before = excludes_zero(r.wald_before);
    const bool sig_after = excludes_zero(r.wald_after);
    if (sig_before != sig_after) return "updated";
    if (sig_before && (r.before > 0) != (r.after > 0)) return "updated";
    return "robust";
}

std::vector<std::string> path_labels(const RobustnessReport& r) {
    std::vector<std::string> out;
    auto take = [&](const PathCell& c) {
        if (out.empty() && c.ok)
            for (const auto& p : c.paths) out.push_back(p.label);
    };
    for (const auto& row : r.lambda_profile) take(row.cell);
    for (const auto& row : r.lofo) take(row.cell);
    take(r.clf);
    take(r.cross_scale);
    return out;
}

std::vector<std::string> path_cells(const PathCell& c, std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(c.ok && i < c.paths.size() ? fmt(c.paths[i].estimate) : "NA");
    out.push_back(c.ok ? "ok" : c.error);
    return out;
}

void fit_row(std::ostringstream& os, const std::string& name, const SemSolution& s) {
    std::vector<std::string> cells = {name, fmt(s.chi_square), std::to_string(s.df)};
    if (s.fit) {
        cells.push_back(fmt(s.fit->cfi));
        cells.push_back(fmt(s.fit->tli));
        cells.push_back(fmt(s.fit->rmsea));
        cells.push_back(fmt(s.fit->srmr));
    } else {
        cells.insert(cells.end(), 4, "NA");
    }
    row(os, cells);
}

std::string fit_slashes(const SemSolution& s) {
    if (!s.fit) return "NA";
    return fmt(s.fit->cfi) + " / " + fmt(s.fit->tli) + " / " + fmt(s.fit->rmsea) + " / " + fmt(s.fit->srmr);
}

void panel_table(std::ostringstream& os, const DeltaBetaPanel& p) {
    header(os, {p.correlations ? "latent correlation" : "path", "before", "after", "delta", "95% CI (delta)",
                "SE before", "SE after", "inference"});
    for (const auto& r : p.rows)
        row(os, {r.path, fmt(r.before), fmt(r.after), fmt(r.delta), ci(r.ci_lo, r.ci_hi), fmt(r.se_before),
                 fmt(r.se_after), inference(r)});
}

}  // namespace

std::string weights_csv(const std::vector<std::string>& items, const Eigen::VectorXd& w) {
    if (static_cast<std::size_t>(w.size()) != items.size()) throw InputError("weights and items differ in length");
    std::ostringstream os;
    os << "item,final_weight\n";
    for (std::size_t i = 0; i < items.size(); ++i) os << items[i] << ',' << fmt(w(static_cast<Eigen::Index>(i)), 6) << '\n';
    return os.str();
}

Eigen::VectorXd parse_weights_csv(const std::string& text, const std::vector<std::string>& items) {
    std::istringstream in(text);
    auto rows = internal::read_csv(in);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "item" || rows[0][1] != "final_weight")
        throw InputError("weights file must have header item,final_weight");
    if (rows.size() - 1 != items.size())
        throw InputError("weights file has " + std::to_string(rows.size() - 1) + " rows for " +
                         std::to_string(items.size()) + " items");
    Eigen::VectorXd w(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& r = rows[i + 1];
        if (r.size() != 2 || r[0] != items[i]) throw InputError("weights row " + std::to_string(i + 1) + " is not item '" + items[i] + "'");
        try {
            std::size_t used = 0;
            w(static_cast<Eigen::Index>(i)) = std::stod(r[1], &used);
            if (used != r[1].size()) throw std::invalid_argument(r[1]);
        } catch (const std::exception&) {
            throw InputError("non-numeric weight for item '" + items[i] + "'");
        }
    }
    return w;
}

std::string calibration_json(const CalibrationResult& c, const std::vector<std::string>& items) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["lambda"] = c.lambda;
    ordered_json gamma = ordered_json::array();
    for (std::size_t f = 0; f < c.feature_names.size(); ++f) {
        ordered_json g;
        g["feature"] = c.feature_names[f];
        g["estimate"] = c.gamma(static_cast<Eigen::Index>(f));
        g["ci_lo"] = c.gamma_ci ? num((*c.gamma_ci)[f].lo) : nullptr;
        g["ci_hi"] = c.gamma_ci ? num((*c.gamma_ci)[f].hi) : nullptr;
        gamma.push_back(g);
    }
    j["gamma"] = gamma;
    j["R2"] = c.r2;
    j["r"] = c.r;
    j["explained"] = c.explained;
    j["m"] = std::vector<double>(c.m.data(), c.m.data() + c.m.size());
    j["m_hat"] = std::vector<double>(c.fitted.data(), c.fitted.data() + c.fitted.size());
    ordered_json weights = ordered_json::array();
    for (std::size_t i = 0; i < items.size(); ++i)
        weights.push_back({{"item", items[i]}, {"final_weight", c.w(static_cast<Eigen::Index>(i))}});
    j["weights"] = weights;
    ordered_json sweep = ordered_json::array();
    for (const auto& pt : c.sweep) {
        ordered_json s;
        s["lambda"] = pt.lambda;
        s["feasible"] = pt.feasible;
        s["R2"] = pt.feasible ? num(pt.r2) : nullptr;
        s["explained"] = pt.feasible ? num(pt.explained) : nullptr;
        s["max_weight"] = pt.feasible ? num(pt.max_weight) : nullptr;
        if (!pt.note.empty()) s["note"] = pt.note;
        sweep.push_back(s);
    }
    j["sweep"] = sweep;
    j["flags"] = {{"plateau_found", c.plateau_found},
                  {"flipped", c.flipped},
                  {"cross_scale_only", c.cross_scale_only},
                  {"bootstrap", c.gamma_ci.has_value()},
                  {"warnings", c.warnings}};
    return j.dump(2) + "\n";
}

std::string lisrel_fragment(const ModelSpec& spec, const std::vector<std::string>& items, const Eigen::VectorXd& w) {
    const std::size_t k = items.size(), q = spec.traits.size();
    if (static_cast<std::size_t>(w.size()) != k) throw InputError("weights and items differ in length");
    std::ostringstream os;
    os << "! FAMF method factor: k=" << k << " items, q=" << q << " traits, method loadings fixed\n";
    os << "MO NY=" << k << " NE=" << q + 1 << " LY=FU,FI TE=SY PS=SY PH=SY\n";
    os << "LA";
    for (const auto& t : spec.traits) os << ' ' << t.first;
    os << " M\n";
    os << "LY\n";
    for (std::size_t i = 0; i < k; ++i) {
        os << items[i];
        for (const auto& [trait, trait_items] : spec.traits) {
            std::string cell = "0";
            for (std::size_t j = 0; j < trait_items.size(); ++j)
                if (trait_items[j] == items[i])
                    cell = spec.identification == Identification::marker && j == 0 ? "1" : "*";
            os << ' ' << cell;
        }
        os << ' ' << fmt(w(static_cast<Eigen::Index>(i)), 3) << "  ! method fixed\n";
    }
    std::set<std::string> endogenous;
    for (const auto& r : spec.regressions) endogenous.insert(r.outcome);
    os << "PH\n";
    for (std::size_t a = 0; a < q; ++a) {
        os << spec.traits[a].first;
        for (std::size_t b = 0; b <= q; ++b) {
            std::string cell;
            if (b == q) cell = "0";
            else if (a == b) cell = spec.identification == Identification::unit_variance ? "1" : "*";
            else if (endogenous.count(spec.traits[a].first) || endogenous.count(spec.traits[b].first)) cell = "0";
            else cell = "*";
            os << ' ' << cell;
        }
        os << '\n';
    }
    os << "M";
    for (std::size_t b = 0; b < q; ++b) os << " 0";
    os << " 1\n";
    os << "OU ND=3 RS MI\n";
    return os.str();
}

std::string amos_checklist(const ModelSpec& spec, const std::vector<std::string>& items, const Eigen::VectorXd& w) {
    if (static_cast<std::size_t>(w.size()) != items.size()) throw InputError("weights and items differ in length");
    std::ostringstream os;
    os << "AMOS checklist: fixed method factor M for " << items.size() << " items\n\n";
    os << "1. Add latent M.\n";
    os << "2. Draw single-headed paths from M to every observed indicator (" << items.size() << " paths).\n";
    os << "3. Fix each loading to its Final_Weight w_i:\n";
    for (std::size_t i = 0; i < items.size(); ++i)
        os << "     " << items[i] << "  " << fmt(w(static_cast<Eigen::Index>(i)), 6) << '\n';
    os << "4. Double-click M: set Variance = 1.\n";
    os << "5. Set Cov(M, any trait) = 0 (orthogonality) for: " << join(spec.trait_names(), ", ") << ".\n";
    os << "6. Re-estimate; export standardized solution and residuals.\n";
    return os.str();
}

std::string solution_text(const SemSolution& s) {
    std::ostringstream os;
    auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
    kv("converged", s.converged ? "true" : "false");
    kv("iterations", std::to_string(s.iterations));
    kv("n", std::to_string(s.n));
    kv("free_parameters", std::to_string(s.structure.free_parameters()));
    kv("df", std::to_string(s.df));
    kv("f_min", fmt(s.f_min, 8));
    kv("chi_square", fmt(s.chi_square, 6));
    if (s.fit) {
        kv("cfi", fmt(s.fit->cfi, 6));
        kv("tli", fmt(s.fit->tli, 6));
        kv("rmsea", fmt(s.fit->rmsea, 6));
        kv("srmr", fmt(s.fit->srmr, 6));
        kv("chi_square_null", fmt(s.fit->chi_square_null, 6));
        kv("df_null", std::to_string(s.fit->df_null));
    }
    for (std::size_t p = 0; p < s.structure.param_labels.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        kv("est." + s.structure.param_labels[p], fmt(s.estimates(i), 6));
        kv("se." + s.structure.param_labels[p], s.se.size() > i ? fmt(s.se(i), 6) : "NA");
    }
    for (const auto& w : s.warnings) kv("warning", w);
    return os.str();
}

std::string residuals_csv(const std::vector<std::string>& items, const Eigen::MatrixXd& r) {
    std::ostringstream os;
    os << "item";
    for (const auto& it : items) os << ',' << it;
    os << '\n';
    for (std::size_t i = 0; i < items.size(); ++i) {
        os << items[i];
        for (std::size_t j = 0; j < items.size(); ++j)
            os << ',' << fmt(r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 6);
        os << '\n';
    }
    return os.str();
}

std::string stability_csv(const AnalysisBundle& b) {
    std::ostringstream os;
    os << "panel,path,kind,before,after,delta,ci_lo,ci_hi,se_before,se_after,bootstrap,replicates,failures,unreliable\n";
    auto emit = [&](const std::string& name, const DeltaBetaPanel& p) {
        for (const auto& r : p.rows)
            os << name << ',' << r.path << ',' << (p.correlations ? "correlation" : "regression") << ','
               << fmt(r.before, 6) << ',' << fmt(r.after, 6) << ',' << fmt(r.delta, 6) << ',' << fmt(r.ci_lo, 6)
               << ',' << fmt(r.ci_hi, 6) << ',' << fmt(r.se_before, 6) << ',' << fmt(r.se_after, 6) << ','
               << (p.bootstrap ? 1 : 0) << ',' << p.replicates << ',' << p.failures << ',' << (p.unreliable ? 1 : 0)
               << '\n';
    };
    if (b.stability) emit("famf", *b.stability);
    for (const auto& [name, p] : b.comparator_panels) emit(name, p);
    return os.str();
}

std::string robustness_json(const RobustnessReport& r) {
    using nlohmann::ordered_json;
    auto cell = [](const PathCell& c) {
        ordered_json j;
        j["ok"] = c.ok;
        if (!c.ok) j["error"] = c.error;
        ordered_json paths = ordered_json::array();
        for (const auto& p : c.paths) paths.push_back({{"path", p.label}, {"estimate", num(p.estimate)}, {"se", num(p.se)}});
        j["paths"] = paths;
        if (c.weights.size() > 0) j["weights"] = std::vector<double>(c.weights.data(), c.weights.data() + c.weights.size());
        return j;
    };
    ordered_json j;
    ordered_json lp = ordered_json::array();
    for (const auto& row : r.lambda_profile) {
        ordered_json e = cell(row.cell);
        e["lambda"] = row.lambda;
        lp.push_back(e);
    }
    j["lambda_profile"] = lp;
    ordered_json lofo = ordered_json::array();
    for (const auto& row : r.lofo) {
        ordered_json e = cell(row.cell);
        e["omitted"] = row.omitted;
        lofo.push_back(e);
    }
    j["lofo"] = lofo;
    j["clf"] = cell(r.clf);
    j["cross_scale_applicable"] = r.cross_scale_applicable;
    j["cross_scale"] = r.cross_scale_applicable ? cell(r.cross_scale) : ordered_json("not applicable");
    return j.dump(2) + "\n";
}

std::string render_report(const AnalysisBundle& b) {
    if (!b.calibration || !b.famf) throw InputError("report needs the baseline, calibration and FAMF fit");
    const CalibrationResult& c = *b.calibration;
    const auto items = b.inputs.key.names();
    std::ostringstream os;

    os << "# FAMF-SEM analysis report\n\n";
    os << "## Method\n\n";
    os << "We applied a metadata-only Feature-Augmented Method Factor (FAMF-SEM). Item method loadings w_i were "
          "derived by ridge-regressing the item residual signature m_i on effects-coded/z-scored metadata ("
       << join(c.feature_names, ", ") << "). We centered and scaled w to sum(w_i^2) = k, fixed Var(M) = 1, and "
          "constrained M orthogonal to the traits.\n\n";
    os << "- items k = " << items.size() << ", respondents n = " << b.moments.n << " (" << b.inputs.responses.dropped_rows
       << " rows dropped by listwise deletion)\n";
    os << "- traits: " << join(b.inputs.model.trait_names(), ", ") << "; identification: "
       << (b.inputs.model.identification == Identification::marker ? "marker" : "unit variance") << "\n";
    os << "- ridge penalty lambda = " << fmt(c.lambda) << " from grid " << grid_text([&] {
        std::vector<double> g;
        for (const auto& pt : c.sweep) g.push_back(pt.lambda);
        return g;
    }()) << (c.plateau_found ? " (plateau rule)" : " (no plateau; fallback)") << "\n";
    os << "- residual signal: " << (c.cross_scale_only ? "cross-scale pairs only" : "all item pairs") << "\n";
    os << "- weight orientation: " << (c.flipped ? "sign flipped" : "as estimated") << "\n\n";

    os << "## Diagnostics\n\n";
    os << "FAMF explained R^2 = " << fmt(c.r2) << " of the residual pattern; r(m, m_hat) = " << fmt(c.r)
       << " (1 - SSE/SST = " << fmt(c.explained) << "). Global fit: CFI/TLI/RMSEA/SRMR = " << fit_slashes(*b.famf)
       << ".\n\n";
    header(os, {"model", "chi2", "df", "CFI", "TLI", "RMSEA", "SRMR"});
    fit_row(os, "baseline", b.baseline);
    fit_row(os, "famf", *b.famf);
    if (b.clf) fit_row(os, "clf", *b.clf);
    if (b.cu) fit_row(os, "cu", *b.cu);
    if (b.famf_cu) fit_row(os, "famf_cu", *b.famf_cu);
    os << "\nLargest baseline residual correlations:\n\n";
    header(os, {"item", "item", "r_res"});
    for (const auto& p : b.pockets) row(os, {items[p.i], items[p.j], fmt(p.r)});
    std::vector<std::string> notes = b.validation.warnings();
    for (const auto& w : c.warnings) notes.push_back(w);
    for (const auto& w : b.baseline.warnings) notes.push_back("baseline: " + w);
    for (const auto& w : b.famf->warnings) notes.push_back("famf: " + w);
    for (const auto& w : b.warnings) notes.push_back(w);
    if (!notes.empty()) {
        os << "\nWarnings:\n\n";
        for (const auto& n : notes) os << "- " << n << '\n';
    }
    os << '\n';

    os << "## Results\n\n";
    if (b.stability) {
        const auto& p = *b.stability;
        if (!p.rows.empty()) {
            const auto& r0 = p.rows.front();
            os << "Key structural " << (p.correlations ? "correlations" : "coefficients") << " changed by delta = "
               << fmt(r0.delta) << " (95% CI " << ci(r0.ci_lo, r0.ci_hi) << ") for " << r0.path << ".\n\n";
        }
        panel_table(os, p);
        if (p.bootstrap)
            os << "\nDelta CIs: respondent bootstrap, " << p.replicates << " replicates, " << p.failures
               << " failed refits" << (p.unreliable ? " (more than 10% failed; panel unreliable)" : "") << ".\n";
        else
            os << "\n" << kDash << " bootstrap not run; Wald SEs only.\n";
        for (const auto& [name, panel] : b.comparator_panels) {
            os << "\nComparator " << name << " (Wald only):\n\n";
            panel_table(os, panel);
        }
    } else {
        os << "not run\n";
    }
    os << '\n';

    os << "## Attribution\n\n";
    header(os, {"feature", "gamma", "95% CI", "sign"});
    for (std::size_t f = 0; f < c.feature_names.size(); ++f) {
        const double g = c.gamma(static_cast<Eigen::Index>(f));
        std::string lo_hi = kDash;
        std::string sign = g > 0 ? "+" : (g < 0 ? "-" : "0");
        if (c.gamma_ci) {
            const auto& iv = (*c.gamma_ci)[f];
            lo_hi = ci(iv.lo, iv.hi);
            if (!excludes_zero(iv)) sign += " (CI includes 0)";
        }
        row(os, {c.feature_names[f], fmt(g), lo_hi, sign});
    }
    if (!c.gamma_ci) os << "\n" << kDash << " item bootstrap not run; no intervals for gamma.\n";
    os << "\nFinal weights:\n\n";
    header(os, {"item", "final_weight"});
    for (std::size_t i = 0; i < items.size(); ++i) row(os, {items[i], fmt(c.w(static_cast<Eigen::Index>(i)), 6)});
    os << '\n';

    os << "## Robustness\n\n";
    if (!b.robustness) {
        os << "not run\n";
    } else {
        const auto& r = *b.robustness;
        const auto labels = path_labels(r);
        std::vector<std::string> cols = labels;
        cols.push_back("status");
        os << "Lambda profile:\n\n";
        std::vector<std::string> h = {"lambda"};
        h.insert(h.end(), cols.begin(), cols.end());
        header(os, h);
        for (const auto& lp : r.lambda_profile) {
            std::vector<std::string> cells = {fmt(lp.lambda)};
            auto rest = path_cells(lp.cell, labels.size());
            cells.insert(cells.end(), rest.begin(), rest.end());
            row(os, cells);
        }
        os << "\nLeave-one-feature-out:\n\n";
        h[0] = "omitted";
        header(os, h);
        for (const auto& lo : r.lofo) {
            std::vector<std::string> cells = {lo.omitted};
            auto rest = path_cells(lo.cell, labels.size());
            cells.insert(cells.end(), rest.begin(), rest.end());
            row(os, cells);
        }
        os << "\nComparators:\n\n";
        h[0] = "variant";
        header(os, h);
        {
            std::vector<std::string> cells = {"clf"};
            auto rest = path_cells(r.clf, labels.size());
            cells.insert(cells.end(), rest.begin(), rest.end());
            row(os, cells);
        }
        if (r.cross_scale_applicable) {
            std::vector<std::string> cells = {"cross-scale m"};
            auto rest = path_cells(r.cross_scale, labels.size());
            cells.insert(cells.end(), rest.begin(), rest.end());
            row(os, cells);
        } else {
            os << "\nCross-scale restriction: not applicable (single scale).\n";
        }
    }
    os << "\nCorrelated uniquenesses: ";
    if (b.cu || b.famf_cu) {
        os << "sensitivity refits with freed residual covariances are listed with the comparators above.\n\n";
    } else {
        os << "none added.\n\n";
    }

    os << "## Provenance\n\n";
    os << "- tool version: " << b.provenance.tool_version << "\n";
    os << "- seed: " << b.provenance.seed << "\n";
    for (const auto& [file, digest] : b.provenance.input_digests) os << "- " << file << ": fnv1a64 " << digest << "\n";
    return os.str();
}

std::string responses_csv(const ResponseMatrix& r) {
    std::ostringstream os;
    os << join(r.item_names, ",") << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < r.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.10g", r.values(i, j));
            os << (j ? "," : "") << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string item_key_csv(const ItemKey& key) {
    std::ostringstream os;
    os << "item,scale,reversed,page,order,scale_width,polarity,length\n";
    for (const auto& it : key.items)
        os << it.name << ',' << it.scale << ',' << it.reversed << ',' << it.page << ',' << it.order << ','
           << it.scale_width << ',' << it.polarity << ',' << it.length << '\n';
    return os.str();
}

std::string model_spec_json(const ModelSpec& spec) {
    using nlohmann::ordered_json;
    ordered_json j;
    ordered_json traits = ordered_json::object();
    for (const auto& [name, items] : spec.traits) traits[name] = items;
    j["traits"] = traits;
    ordered_json regs = ordered_json::array();
    for (const auto& r : spec.regressions) regs.push_back({{"outcome", r.outcome}, {"predictors", r.predictors}});
    j["regressions"] = regs;
    ordered_json rc = ordered_json::array();
    for (const auto& [a, b] : spec.residual_covariances) rc.push_back({a, b});
    j["residual_covariances"] = rc;
    j["identification"] = spec.identification == Identification::marker ? "marker" : "unit_variance";
    return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw InputError("cannot write '" + path + "'");
    }
}

std::vector<std::string> export_artifacts(const AnalysisBundle& b, const std::string& out_dir) {
    if (!b.calibration) throw InputError("export needs a calibration");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw InputError("cannot create output directory '" + out_dir + "'");
    const auto items = b.inputs.key.names();
    const Eigen::VectorXd& w = b.calibration->w;
    std::vector<std::pair<std::string, std::string>> files = {
        {"weights.csv", weights_csv(items, w)},
        {"lisrel_fragment.txt", lisrel_fragment(b.inputs.model, items, w)},
        {"amos_checklist.txt", amos_checklist(b.inputs.model, items, w)},
    };
    std::vector<std::string> written;
    for (const auto& [name, content] : files) {
        const std::string path = (fs::path(out_dir) / name).string();
        write_file_atomic(path, content);
        written.push_back(path);
    }
    return written;
}

}  // namespace famf
