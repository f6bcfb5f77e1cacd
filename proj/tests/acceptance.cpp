// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "famf/analysis.hpp"
#include "famf/calibrator.hpp"
#include "famf/report.hpp"
#include "famf/sem.hpp"
#include "famf/simulator.hpp"
#include "test_util.hpp"

using namespace famf;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0 && secs > limit_seconds) {
        o.pass = false;
        o.detail += " (over the " + std::to_string(static_cast<int>(limit_seconds)) + " s budget)";
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-34s %7.1fs  %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

Eigen::MatrixXd random_centered(Eigen::Index k, Eigen::Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd Z(k, p);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = n01(rng);
    return Z.rowwise() - Z.colwise().mean();
}

Eigen::VectorXd random_signal(Eigen::Index k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 0.3);
    Eigen::VectorXd m(k);
    for (Eigen::Index i = 0; i < k; ++i) m(i) = u(rng);
    return m;
}

Outcome ridge_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> kd(6, 12), pd(1, 4);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const Eigen::Index k = kd(rng), p = pd(rng);
        Eigen::MatrixXd Z = random_centered(k, p, rng);
        Eigen::VectorXd m = random_signal(k, rng);
        for (double lambda : default_lambda_grid()) {
            Eigen::VectorXd closed = ridge_fit(Z, m, lambda).gamma;
            worst = std::max(worst, (closed - test::ridge_by_descent(Z, m, lambda)).cwiseAbs().maxCoeff());
        }
    }
    return {worst < 1e-6, "max|dgamma| = " + num(worst)};
}

Outcome weight_constraints() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> kd(4, 30), pd(1, 5);
    double worst_sum = 0.0, worst_sq = 0.0;
    int calls = 0;
    auto check = [&](const Eigen::VectorXd& w) {
        worst_sum = std::max(worst_sum, std::abs(w.sum()));
        worst_sq = std::max(worst_sq, std::abs(w.squaredNorm() - static_cast<double>(w.size())));
        ++calls;
    };
    for (int inst = 0; inst < 300; ++inst) {
        const Eigen::Index k = kd(rng), p = std::min<Eigen::Index>(pd(rng), k - 2);
        Eigen::MatrixXd Z = random_centered(k, p, rng) * std::pow(10.0, (inst % 7) - 3);
        Eigen::VectorXd m = random_signal(k, rng);
        for (double lambda : {0.0, 0.5, 1.0, 2.0, 5.0, 100.0}) {
            RidgeFit fit = ridge_fit(Z, m, lambda);
            check(finalize_weights(Z, fit.gamma, m).w);
            check(finalize_weights(Z, fit.gamma, m, Eigen::Index{0}).w);
        }
        LambdaSelection sel = select_lambda(Z, m, default_lambda_grid());
        for (const auto& pt : sel.sweep)
            if (pt.feasible) check(pt.weights);
    }
    // the calibrations made on simulated survey data
    for (std::size_t rep = 0; rep < 40; ++rep) {
        SimCondition c;
        c.cmv = rep % 2 ? CmvStrength::high : CmvStrength::low;
        c.aligned = rep % 3 != 0;
        c.seed = 9;
        SimDataset d = generate_dataset(c, rep);
        MomentSummary mom = sample_moments(d.data);
        SemSolution base = fit_model(mom, build_structure(d.spec, d.key.names()));
        CalibrationOptions co;
        co.bootstrap = 0;
        CalibrationResult cal = calibrate(base.residual_correlations, d.key.scales(), encode_features(d.key), co);
        check(cal.w);
        for (const auto& pt : cal.sweep)
            if (pt.feasible) check(pt.weights);
    }
    const bool ok = worst_sum < 1e-10 && worst_sq < 1e-8;
    return {ok, std::to_string(calls) + " calls, max|sum w| = " + num(worst_sum) + ", max|sum w^2 - k| = " +
                    num(worst_sq)};
}

Eigen::MatrixXd cfa_population(Eigen::MatrixXd* loadings_out = nullptr) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(9, 3);
    L.col(0).segment(0, 3) << 0.7, 0.6, 0.8;
    L.col(1).segment(3, 3) << 0.75, 0.65, 0.55;
    L.col(2).segment(6, 3) << 0.8, 0.7, 0.6;
    Eigen::MatrixXd phi(3, 3);
    phi << 1, 0.3, 0.2, 0.3, 1, 0.4, 0.2, 0.4, 1;
    Eigen::VectorXd theta = Eigen::VectorXd::Ones(9) - (L * phi * L.transpose()).diagonal();
    if (loadings_out) *loadings_out = L;
    return test::factor_cov(L, phi, theta);
}

ModelSpec cfa_spec() {
    auto x = test::names("x", 9);
    ModelSpec s;
    s.traits = {{"F1", {x[0], x[1], x[2]}}, {"F2", {x[3], x[4], x[5]}}, {"F3", {x[6], x[7], x[8]}}};
    return s;
}

Outcome sem_correctness() {
    Eigen::MatrixXd L;
    Eigen::MatrixXd sigma = cfa_population(&L);
    auto items = test::names("x", 9);
    SemStructure s = build_structure(cfa_spec(), items);

    // (a) population fit
    SemSolution pop = fit_model(test::population_moments(sigma, 1000), s);
    const bool a = pop.converged && pop.f_min < 1e-8 && pop.chi_square < 1e-4;

    // (b) gradient check on several structures
    double worst_rel = 0.0;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    Eigen::MatrixXd S = sigma;
    S(0, 4) += 0.04;
    S(4, 0) += 0.04;
    ModelSpec reg = cfa_spec();
    reg.regressions = {{"F3", {"F1", "F2"}}};
    reg.residual_covariances = {{"x2", "x5"}};
    std::vector<SemStructure> structures = {
        s, build_structure(reg, items), build_structure(cfa_spec(), items, MethodFactor::equal()),
        build_structure(reg, items, MethodFactor::fixed(Eigen::VectorXd::LinSpaced(9, -0.6, 0.6)))};
    for (const auto& st : structures) {
        MlObjective obj(st, S);
        Objective f = obj.as_objective();
        Eigen::VectorXd base = start_values(st, S);
        for (int point = 0; point < 10; ++point) {
            Eigen::VectorXd x = base;
            for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += u(rng);
            Eigen::VectorXd g;
            if (!std::isfinite(obj(x, &g))) return {false, "infeasible gradient-check point"};
            Eigen::VectorXd fd = central_difference_gradient(f, x);
            worst_rel = std::max(worst_rel, (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()));
        }
    }
    const bool b = worst_rel < 1e-4;

    // (c) recovery at n = 5000
    int good = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
        ResponseMatrix r = test::draw_normal(sigma, 5000, 1000 + run, items);
        FitOptions fo;
        fo.compute_se = false;
        fo.compute_fit_indices = false;
        SemSolution sol = fit_model(sample_moments(r), s, fo);
        if (!sol.converged) continue;
        Eigen::MatrixXd est = sol.matrices().loadings;
        if ((est - L).cwiseAbs().maxCoeff() <= 0.05) ++good;
    }
    const bool c = good >= 95;
    return {a && b && c, "(a) F_min = " + num(pop.f_min) + ", chi2 = " + num(pop.chi_square) +
                             "; (b) max rel grad err = " + num(worst_rel) + "; (c) " + std::to_string(good) +
                             "/100 runs within 0.05"};
}

Outcome hand_fixtures() {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd D = Eigen::Vector2d(2.0, 1.0).asDiagonal();
    const double f = fml_discrepancy(I, D);
    const bool f_ok = std::abs(f - (std::log(2.0) - 0.5)) < 1e-12;

    auto s = build_structure(test::one_factor(3), test::names("x", 3));
    Eigen::VectorXd p(6);
    p << 0.6, 0.7, 0.8, 0.64, 0.51, 0.36;
    Eigen::MatrixXd sigma = implied_covariance(p, s);
    const bool s_ok = sigma(0, 1) == 0.6 * 0.7 && sigma(0, 2) == 0.6 * 0.8 && sigma(1, 2) == 0.7 * 0.8 &&
                      std::abs(sigma(0, 1) - 0.42) < 1e-15 && std::abs(sigma(0, 2) - 0.48) < 1e-15 &&
                      std::abs(sigma(1, 2) - 0.56) < 1e-15;

    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 3);
    r(0, 1) = r(1, 0) = 0.1;
    r(0, 2) = r(2, 0) = -0.3;
    r(1, 2) = r(2, 1) = 0.2;
    Eigen::VectorXd m = residual_signal(r, {"A", "A", "A"}, false);
    const bool m_ok = (m - Eigen::Vector3d(0.2, 0.15, 0.25)).cwiseAbs().maxCoeff() < 1e-12;
    return {f_ok && s_ok && m_ok, "F = " + num(f, 15) + ", sigma12/13/23 = " + num(sigma(0, 1), 17) + "/" +
                                      num(sigma(0, 2), 17) + "/" + num(sigma(1, 2), 17) + ", m = (" + num(m(0)) +
                                      ", " + num(m(1)) + ", " + num(m(2)) + ")"};
}

SimCondition sim(const std::string& label, CmvStrength cmv, bool aligned, std::size_t n, double beta, int reps) {
    SimCondition c;
    c.label = label;
    c.cmv = cmv;
    c.aligned = aligned;
    c.n = n;
    c.beta_true = beta;
    c.reps = reps;
    c.seed = 42;
    return c;
}

std::string summary(const MethodSummary& m) {
    return to_string(m.method) + " bias " + num(m.bias, 3) + " mse " + num(m.mse, 3) + " (" +
           std::to_string(m.successes) + "/" + std::to_string(m.reps) + ")";
}

Outcome oracle_consistency() {
    ConditionResult r = run_condition(sim("oracle", CmvStrength::high, true, 2000, 0.3, 100), 0);
    const auto& o = r.method(SimMethod::oracle);
    return {!r.invalid && std::abs(o.bias) < 0.02, summary(o)};
}

Outcome aligned_high_cmv() {
    ConditionResult r = run_condition(sim("aligned", CmvStrength::high, true, 500, 0.3, 200), 1);
    const auto& base = r.method(SimMethod::baseline);
    const auto& clf = r.method(SimMethod::clf);
    const auto& famf = r.method(SimMethod::famf);
    const bool ok = !r.invalid && std::abs(famf.bias) < std::abs(base.bias) && famf.mse < clf.mse;
    return {ok, summary(base) + "; " + summary(clf) + "; " + summary(famf)};
}

Outcome misaligned_metadata() {
    ConditionResult r = run_condition(sim("misaligned", CmvStrength::high, false, 500, 0.3, 200), 2);
    const auto& clf = r.method(SimMethod::clf);
    const auto& famf = r.method(SimMethod::famf);
    const double gap = std::abs(famf.mse - clf.mse) / clf.mse;
    return {!r.invalid && gap <= 0.25, summary(clf) + "; " + summary(famf) + "; relative gap " + num(gap, 3)};
}

Outcome type_one() {
    ConditionResult r = run_condition(sim("null", CmvStrength::none, true, 500, 0.0, 500), 3);
    bool ok = !r.invalid;
    std::string detail;
    for (SimMethod m : {SimMethod::baseline, SimMethod::famf}) {
        const auto& s = r.method(m);
        ok = ok && s.rejection_rate >= 0.02 && s.rejection_rate <= 0.09 && s.coverage >= 0.92 && s.coverage <= 0.98;
        detail += to_string(m) + " rejection " + num(s.rejection_rate, 3) + " coverage " + num(s.coverage, 3) + " (" +
                  std::to_string(s.successes) + "/" + std::to_string(s.reps) + "); ";
    }
    return {ok, detail};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct PipelineFiles {
    std::string report, calibration, weights, lisrel, amos;
};

// The full pipeline on files, as the report subcommand runs it.
PipelineFiles pipeline_run(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir) {
    const std::string r = (in_dir / "responses.csv").string(), k = (in_dir / "itemkey.csv").string(),
                      m = (in_dir / "model.json").string();
    Inputs inputs = load_inputs(r, k, m);
    Provenance prov;
    prov.seed = 42;
    prov.input_digests = {{"responses.csv", file_digest(r)}, {"itemkey.csv", file_digest(k)}, {"model.json", file_digest(m)}};
    AnalysisOptions opt;
    opt.clf = true;
    AnalysisBundle b = run_analysis(inputs, opt, prov);
    std::filesystem::create_directories(out_dir);
    export_artifacts(b, out_dir.string());
    write_file_atomic((out_dir / "report.md").string(), render_report(b));
    write_file_atomic((out_dir / "calibration.json").string(), calibration_json(*b.calibration, b.inputs.key.names()));
    return {slurp(out_dir / "report.md"), slurp(out_dir / "calibration.json"), slurp(out_dir / "weights.csv"),
            slurp(out_dir / "lisrel_fragment.txt"), slurp(out_dir / "amos_checklist.txt")};
}

std::filesystem::path work_dir() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() / "famf_acceptance";
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d / "input");
        SimCondition c = sim("example", CmvStrength::high, true, 500, 0.3, 1);
        SimDataset ds = generate_dataset(c, 0);
        write_file_atomic((d / "input" / "responses.csv").string(), responses_csv(ds.data));
        write_file_atomic((d / "input" / "itemkey.csv").string(), item_key_csv(ds.key));
        write_file_atomic((d / "input" / "model.json").string(), model_spec_json(ds.spec));
        return d;
    }();
    return dir;
}

Outcome determinism() {
    auto d = work_dir();
    PipelineFiles a = pipeline_run(d / "input", d / "run1");
    PipelineFiles b = pipeline_run(d / "input", d / "run2");
    std::vector<std::string> differ;
    if (a.report != b.report) differ.push_back("report");
    if (a.calibration != b.calibration) differ.push_back("calibration.json");
    if (a.weights != b.weights) differ.push_back("weights.csv");
    if (a.lisrel != b.lisrel) differ.push_back("lisrel_fragment.txt");
    if (differ.empty()) return {true, "report, calibration.json, weights.csv, LISREL fragment byte-identical"};
    std::string what;
    for (const auto& x : differ) what += x + " ";
    return {false, "differ: " + what};
}

Outcome interop() {
    auto d = work_dir();
    if (!std::filesystem::exists(d / "run1" / "lisrel_fragment.txt")) pipeline_run(d / "input", d / "run1");
    const std::string lisrel = slurp(d / "run1" / "lisrel_fragment.txt");
    const std::string amos = slurp(d / "run1" / "amos_checklist.txt");
    std::vector<std::string> missing;
    auto need = [&](const std::string& text, const std::string& what) {
        if (text.find(what) == std::string::npos) missing.push_back(what);
    };
    need(lisrel, "MO NY=24 NE=3 ");
    need(lisrel, "LA T1 T2 M\n");
    need(lisrel, "\nPH\n");
    need(lisrel, "M 0 0 1\n");
    // one LY row per item, each ending with the fixed method weight
    std::istringstream ls(lisrel);
    std::string line;
    int fixed_rows = 0;
    std::vector<std::string> names;
    for (int i = 1; i <= 24; ++i) names.push_back((i < 10 ? "y0" : "y") + std::to_string(i));
    Eigen::VectorXd w = parse_weights_csv(slurp(d / "run1" / "weights.csv"), names);
    while (std::getline(ls, line) && fixed_rows < 24) {
        if (line.find("! method fixed") == std::string::npos) continue;
        std::istringstream cells(line);
        std::string item, a, b, c;
        cells >> item >> a >> b >> c;
        const bool pattern = item == names[static_cast<std::size_t>(fixed_rows)] && (a == "*") != (b == "*") &&
                             (a == "0" || b == "0");
        if (pattern && std::abs(std::stod(c) - w(fixed_rows)) <= 0.0005) ++fixed_rows;
    }
    if (fixed_rows != 24) missing.push_back("24 fixed method rows (found " + std::to_string(fixed_rows) + ")");
    for (int step = 1; step <= 6; ++step) need(amos, "\n" + std::to_string(step) + ". ");
    need(amos, "set Variance = 1");
    need(amos, "Add latent M");
    if (missing.empty()) return {true, "LISREL header and fixed method column; AMOS steps 1-6"};
    std::string what;
    for (const auto& x : missing) what += "[" + x + "] ";
    return {false, "missing " + what};
}

}  // namespace

int main() {
    run(1, "ridge oracle equivalence", 5, ridge_oracle);
    run(2, "weight constraints", 0, weight_constraints);
    run(3, "SEM correctness", 120, sem_correctness);
    run(4, "hand-derived fixtures", 0, hand_fixtures);
    run(5, "oracle FAMF consistency", 300, oracle_consistency);
    run(6, "aligned high CMV", 600, aligned_high_cmv);
    run(7, "misaligned metadata", 600, misaligned_metadata);
    run(8, "Type I control", 900, type_one);
    run(9, "determinism", 0, determinism);
    run(10, "interop exports", 0, interop);
    std::filesystem::remove_all(work_dir());
    std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
