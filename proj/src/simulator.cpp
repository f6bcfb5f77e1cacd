#include "famf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "famf/calibrator.hpp"
#include "famf/error.hpp"
#include "famf/features.hpp"
#include "famf/pipeline.hpp"
#include "famf/random.hpp"
#include "famf/sem.hpp"

namespace famf {

namespace {

constexpr std::size_t kItems = 24;
constexpr double kCrossLoading = 0.3;
constexpr double kMinTheta = 0.05;
constexpr int kMaxAttempts = 20;
constexpr double kInterceptSds = 3.0;
constexpr double kZ975 = 1.959963984540054;

std::string item_name(std::size_t i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "y%02zu", i + 1);
    return buf;
}

ItemKey draw_metadata(NormalSource& normal) {
    ItemKey key;
    for (std::size_t i = 0; i < kItems; ++i) {
        ItemInfo it;
        it.name = item_name(i);
        const bool t1 = i % 2 == 0;
        it.scale = t1 ? "T1" : "T2";
        it.reversed = normal.uniform() < 1.0 / 3.0 ? 1 : 0;
        it.polarity = it.reversed ? -1 : 1;
        it.order = static_cast<int>(i + 1);
        it.page = (it.order + 5) / 6;
        it.scale_width = t1 ? 5 : 7;
        it.length = static_cast<int>(std::clamp(std::round(12.0 + 3.0 * normal()), 5.0, 25.0));
        key.items.push_back(std::move(it));
    }
    return key;
}

double gamma_for(const std::string& feature) {
    if (feature == "reversed") return 0.5;
    if (feature == "page") return -0.5;
    if (feature == "length") return -0.5;
    return 0.0;
}

ModelSpec simulation_spec(const ItemKey& key) {
    ModelSpec spec;
    std::vector<std::string> t1, t2;
    for (const auto& it : key.items) (it.scale == "T1" ? t1 : t2).push_back(it.name);
    spec.traits = {{"T1", t1}, {"T2", t2}};
    spec.regressions = {{"T2", {"T1"}}};
    return spec;
}

// Hands the calibrator metadata that no longer belongs to the items:
// the feature fields are shuffled across rows, names and scales stay put.
ItemKey permute_metadata(const ItemKey& key, std::mt19937_64& engine) {
    std::vector<std::size_t> perm(key.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(engine, i + 1)]);
    ItemKey out = key;
    for (std::size_t i = 0; i < key.size(); ++i) {
        const auto& src = key.items[perm[i]];
        auto& dst = out.items[i];
        dst.reversed = src.reversed;
        dst.page = src.page;
        dst.order = src.order;
        dst.scale_width = src.scale_width;
        dst.polarity = src.polarity;
        dst.length = src.length;
    }
    return out;
}

struct RepOutcome {
    std::array<double, 4> estimate;
    std::array<double, 4> se;
    std::array<bool, 4> nonconverged{};
};

double path_coefficient(const SemSolution& sol) { return sol.estimate("T2~T1"); }

}  // namespace

double cmv_share(CmvStrength s) {
    switch (s) {
        case CmvStrength::none: return 0.0;
        case CmvStrength::low: return 0.05;
        case CmvStrength::med: return 0.10;
        case CmvStrength::high: return 0.20;
    }
    return 0.0;
}

std::string to_string(CmvStrength s) {
    switch (s) {
        case CmvStrength::none: return "none";
        case CmvStrength::low: return "low";
        case CmvStrength::med: return "med";
        case CmvStrength::high: return "high";
    }
    return "none";
}

CmvStrength parse_cmv_strength(const std::string& text) {
    if (text == "none") return CmvStrength::none;
    if (text == "low") return CmvStrength::low;
    if (text == "med" || text == "medium") return CmvStrength::med;
    if (text == "high") return CmvStrength::high;
    throw InputError("unknown cmv_strength '" + text + "' (none|low|med|high)");
}

std::string to_string(SimMethod m) {
    switch (m) {
        case SimMethod::baseline: return "baseline";
        case SimMethod::clf: return "clf";
        case SimMethod::famf: return "famf";
        case SimMethod::oracle: return "oracle";
    }
    return "baseline";
}

SimDataset generate_dataset(const SimCondition& c, std::size_t rep, std::size_t condition_index) {
    if (c.n < kItems + 1) throw InputError("simulation sample size must exceed the item count");
    if (c.reps < 1) throw InputError("reps must be at least 1");
    auto engine = make_stream(c.seed, {static_cast<std::uint64_t>(condition_index), static_cast<std::uint64_t>(rep)});
    NormalSource normal(engine);
    const double share = cmv_share(c.cmv);
    const double trait_corr = c.beta_true / std::sqrt(1.0 + c.beta_true * c.beta_true);

    SimDataset ds;
    TruthRecord& t = ds.truth;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
        ItemKey key = draw_metadata(normal);
        FeatureMatrix fm = encode_features(key);
        Eigen::VectorXd gamma(fm.p());
        for (Eigen::Index j = 0; j < fm.p(); ++j) gamma(j) = gamma_for(fm.feature_names[static_cast<std::size_t>(j)]);
        Eigen::VectorXd d = fm.Z * gamma;
        d.array() -= d.mean();
        const double sd = std::sqrt(d.squaredNorm() / static_cast<double>(kItems));
        const double a0 = kInterceptSds * sd;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(kItems);
        if (share > 0.0) {
            w = d.array() + a0;
            w *= std::sqrt(share / (w.squaredNorm() / static_cast<double>(kItems)));
        }

        Eigen::VectorXd lambda(kItems), theta(kItems);
        std::vector<int> trait(kItems);
        for (std::size_t i = 0; i < kItems; ++i) {
            trait[i] = key.items[i].scale == "T1" ? 0 : 1;
            lambda(static_cast<Eigen::Index>(i)) = 0.6 + 0.2 * normal.uniform();
        }
        std::optional<std::size_t> cross;
        if (c.misspecified) cross = kItems - 2;  // last T1 item
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(kItems, 2);
        for (std::size_t i = 0; i < kItems; ++i) L(static_cast<Eigen::Index>(i), trait[i]) = lambda(static_cast<Eigen::Index>(i));
        if (cross) L(static_cast<Eigen::Index>(*cross), 1) = kCrossLoading;
        Eigen::Matrix2d phi;
        phi << 1.0, trait_corr, trait_corr, 1.0;
        Eigen::MatrixXd common = L * phi * L.transpose() + w * w.transpose();
        theta = Eigen::VectorXd::Ones(kItems) - common.diagonal();
        if (theta.minCoeff() < kMinTheta) continue;

        t.lambda = lambda;
        t.w = w;
        t.theta = theta;
        t.gamma_features = fm.feature_names;
        t.gamma = gamma;
        t.a0 = share > 0.0 ? a0 : 0.0;
        t.psi = phi;
        t.beta = c.beta_true;
        t.trait = trait;
        t.cross_loading_item = cross;
        t.generating_key = key;
        t.population_cov = common;
        t.population_cov.diagonal() += theta;
        ok = true;
    }
    if (!ok) throw NumericError("could not draw loadings with every uniqueness >= 0.05 in 20 attempts");

    const auto k = static_cast<Eigen::Index>(kItems);
    const auto n = static_cast<Eigen::Index>(c.n);
    const double zeta_sd = 1.0;
    const double eta2_sd = std::sqrt(c.beta_true * c.beta_true + zeta_sd * zeta_sd);
    Eigen::VectorXd sqrt_theta = t.theta.array().sqrt();
    ds.data.values.resize(n, k);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double eta1 = normal();
        const double eta2 = (c.beta_true * eta1 + zeta_sd * normal()) / eta2_sd;
        const double m = normal();
        for (Eigen::Index i = 0; i < k; ++i) {
            const double eta = t.trait[static_cast<std::size_t>(i)] == 0 ? eta1 : eta2;
            double y = t.lambda(i) * eta + t.w(i) * m + sqrt_theta(i) * normal();
            if (t.cross_loading_item && static_cast<Eigen::Index>(*t.cross_loading_item) == i) y += kCrossLoading * eta2;
            ds.data.values(r, i) = y;
        }
    }
    ds.data.item_names = t.generating_key.names();
    ds.spec = simulation_spec(t.generating_key);
    ds.key = c.aligned ? t.generating_key : permute_metadata(t.generating_key, engine);
    return ds;
}

ConditionResult run_condition(const SimCondition& condition, std::size_t condition_index, const StudyOptions& options) {
    const auto reps = static_cast<std::size_t>(std::max(condition.reps, 0));
    if (reps == 0) throw InputError("reps must be at least 1");
    std::vector<RepOutcome> outcomes(reps);

    FitOptions fo;
    fo.compute_fit_indices = false;

    parallel_for(
        reps,
        [&](std::size_t rep) {
            RepOutcome& out = outcomes[rep];
            out.estimate.fill(std::numeric_limits<double>::quiet_NaN());
            out.se.fill(std::numeric_limits<double>::quiet_NaN());
            SimDataset ds;
            MomentSummary mom;
            try {
                ds = generate_dataset(condition, rep, condition_index);
                mom = sample_moments(ds.data);
            } catch (const std::exception&) {
                return;
            }
            const auto items = ds.key.names();
            auto record = [&](SimMethod m, const SemSolution& sol) {
                const auto i = static_cast<std::size_t>(m);
                if (!sol.converged) {
                    out.nonconverged[i] = true;
                    return;
                }
                out.estimate[i] = path_coefficient(sol);
                out.se[i] = sol.se(static_cast<Eigen::Index>(*sol.structure.param_index("T2~T1")));
            };
            std::optional<SemSolution> baseline;
            try {
                baseline = fit_variant(mom, ds.spec, items, VariantSpec::baseline(), fo);
                record(SimMethod::baseline, *baseline);
            } catch (const std::exception&) {
            }
            try {
                record(SimMethod::clf, fit_variant(mom, ds.spec, items, VariantSpec::clf(), fo));
            } catch (const std::exception&) {
            }
            if (baseline && baseline->converged) {
                try {
                    CalibrationOptions co;
                    co.bootstrap = 0;
                    CalibrationResult cal =
                        calibrate(baseline->residual_correlations, ds.key.scales(), encode_features(ds.key), co);
                    record(SimMethod::famf, fit_variant(mom, ds.spec, items, VariantSpec::famf(cal.w), fo));
                } catch (const std::exception&) {
                }
            }
            try {
                SemStructure s = build_structure(ds.spec, items, MethodFactor::fixed(ds.truth.w));
                record(SimMethod::oracle, fit_model(mom, s, fo));
            } catch (const std::exception&) {
            }
        },
        options.threads);

    ConditionResult res;
    res.condition = condition;
    for (std::size_t mi = 0; mi < kSimMethods.size(); ++mi) {
        MethodSummary& ms = res.methods[mi];
        ms.method = kSimMethods[mi];
        ms.reps = static_cast<int>(reps);
        double sum = 0.0, sq = 0.0;
        int reject = 0, cover = 0;
        for (const auto& o : outcomes) {
            const double b = o.estimate[mi], se = o.se[mi];
            ms.estimates.push_back(b);
            ms.ses.push_back(se);
            if (o.nonconverged[mi]) ++ms.nonconverged;
            if (!std::isfinite(b) || !std::isfinite(se) || se <= 0.0) {
                ++ms.failures;
                ms.estimates.back() = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            ++ms.successes;
            sum += b;
            sq += (b - condition.beta_true) * (b - condition.beta_true);
            if (std::abs(b / se) > kZ975) ++reject;
            if (std::abs(b - condition.beta_true) <= kZ975 * se) ++cover;
        }
        const double nn = ms.successes;
        if (ms.successes > 0) {
            ms.bias = sum / nn - condition.beta_true;
            ms.mse = sq / nn;
            ms.rejection_rate = reject / nn;
            ms.coverage = cover / nn;
        } else {
            ms.bias = ms.mse = ms.rejection_rate = ms.coverage = std::numeric_limits<double>::quiet_NaN();
        }
        if (ms.failures * 5 > ms.reps) res.invalid = true;
    }
    return res;
}

StudyReport run_study(const std::vector<SimCondition>& design, const StudyOptions& options) {
    StudyReport rep;
    for (std::size_t i = 0; i < design.size(); ++i) rep.conditions.push_back(run_condition(design[i], i, options));
    return rep;
}

std::vector<SimCondition> parse_study_design(const std::string& json_text, std::uint64_t master_seed) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("study design is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("conditions")) j = j["conditions"];
    if (!j.is_array() || j.empty()) throw InputError("study design must be a non-empty array of conditions");
    std::vector<SimCondition> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& o = j[i];
        if (!o.is_object()) throw InputError("condition " + std::to_string(i + 1) + " is not an object");
        SimCondition c;
        c.seed = master_seed;
        try {
            c.label = o.value("label", "c" + std::to_string(i + 1));
            c.cmv = parse_cmv_strength(o.value("cmv_strength", std::string("none")));
            const std::string z = o.value("z_informative", std::string("aligned"));
            if (z != "aligned" && z != "misaligned") throw InputError("z_informative must be aligned or misaligned");
            c.aligned = z == "aligned";
            c.n = o.value("n", std::size_t{500});
            c.beta_true = o.value("beta_true", 0.3);
            c.misspecified = o.value("misspecified", false);
            c.reps = o.value("reps", 200);
            if (o.contains("seed")) c.seed = o["seed"].get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError("condition " + std::to_string(i + 1) + ": " + e.what());
        }
        if (c.reps < 1) throw InputError("condition " + std::to_string(i + 1) + ": reps must be at least 1");
        if (c.n < kItems + 1) throw InputError("condition " + std::to_string(i + 1) + ": n must exceed 24");
        out.push_back(c);
    }
    return out;
}

std::string study_results_csv(const StudyReport& report) {
    std::ostringstream os;
    os << "condition,cmv_strength,z_informative,n,beta_true,misspecified,method,reps,successes,failures,"
          "nonconverged,bias,mse,rejection_rate,coverage,invalid\n";
    auto num = [](double v) {
        if (!std::isfinite(v)) return std::string("NA");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    for (const auto& cr : report.conditions) {
        const auto& c = cr.condition;
        for (const auto& m : cr.methods) {
            os << c.label << ',' << to_string(c.cmv) << ',' << (c.aligned ? "aligned" : "misaligned") << ',' << c.n
               << ',' << num(c.beta_true) << ',' << (c.misspecified ? 1 : 0) << ',' << to_string(m.method) << ','
               << m.reps << ',' << m.successes << ',' << m.failures << ',' << m.nonconverged << ',' << num(m.bias)
               << ',' << num(m.mse) << ',' << num(m.rejection_rate) << ',' << num(m.coverage) << ','
               << (cr.invalid ? 1 : 0) << '\n';
        }
    }
    return os.str();
}

}  // namespace famf
