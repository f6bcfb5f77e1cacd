#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "famf/analysis.hpp"
#include "famf/error.hpp"
#include "famf/report.hpp"
#include "famf/simulator.hpp"

namespace fs = std::filesystem;
using namespace famf;

namespace {

struct Shared {
    std::string responses, itemkey, model;
    std::string out = "famf_out";
    std::uint64_t seed = 1;
    std::optional<double> lambda;
    std::string lambda_grid;
    bool cross_scale_only = false;
    int bootstrap = 500;
    bool no_bootstrap = false;
    int gamma_bootstrap = 2000;
    std::optional<std::string> orient_feature;
    bool clf = false;
    std::string cu;
    std::string features;
    std::vector<std::string> interact, poly;
    std::optional<double> bound_uniqueness;
};

void add_data_options(CLI::App* cmd, Shared& s) {
    cmd->add_option("--responses", s.responses, "responses CSV (header = item names)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--itemkey", s.itemkey, "item key CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--model", s.model, "model specification JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", s.out, "output directory");
    cmd->add_option("--seed", s.seed, "master seed");
    cmd->add_option("--bound-uniqueness", s.bound_uniqueness, "lower bound for residual variances");
}

void add_calibration_options(CLI::App* cmd, Shared& s) {
    cmd->add_option("--lambda", s.lambda, "fixed ridge penalty (skips selection)");
    cmd->add_option("--lambda-grid,--grid", s.lambda_grid, "comma-separated ascending lambda grid");
    cmd->add_flag("--cross-scale-only", s.cross_scale_only, "residual signal from cross-scale pairs only");
    cmd->add_option("--gamma-bootstrap", s.gamma_bootstrap, "item bootstrap replicates for gamma CIs");
    cmd->add_option("--orient-feature", s.orient_feature, "force this feature's gamma to be positive");
    cmd->add_option("--features", s.features, "comma-separated subset/order of metadata features");
    cmd->add_option("--interact", s.interact, "interaction term a:b (repeatable)");
    cmd->add_option("--poly", s.poly, "polynomial term feature:degree (repeatable)");
}

void add_fit_options(CLI::App* cmd, Shared& s) {
    cmd->add_option("--bootstrap", s.bootstrap, "respondent bootstrap replicates for delta CIs");
    cmd->add_flag("--no-bootstrap", s.no_bootstrap, "Wald intervals only; skips both bootstraps");
    cmd->add_flag("--clf", s.clf, "also fit the CLF comparator");
    cmd->add_option("--cu", s.cu, "correlated uniquenesses i:j[,i:j...] (names or 1-based positions)");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, sep))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> g;
    for (const auto& tok : split(text, ',')) {
        try {
            std::size_t used = 0;
            g.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InputError("--lambda-grid: '" + tok + "' is not a number");
        }
    }
    return g;
}

AnalysisOptions make_options(const Shared& s, AnalysisStage stage, const std::vector<std::string>& items) {
    AnalysisOptions o;
    o.stage = stage;
    o.features = split(s.features, ',');
    for (const auto& t : s.interact) o.expansion.interactions.push_back(parse_interaction(t));
    for (const auto& t : s.poly) o.expansion.polynomial.push_back(parse_polynomial(t));
    if (!s.lambda_grid.empty()) o.calibration.grid = parse_grid(s.lambda_grid);
    o.calibration.lambda = s.lambda;
    if (s.lambda && !(*s.lambda >= 0.0)) throw InputError("--lambda must be non-negative");
    o.calibration.cross_scale_only = s.cross_scale_only;
    o.calibration.orient_feature = s.orient_feature;
    o.calibration.bootstrap = s.no_bootstrap ? 0 : s.gamma_bootstrap;
    o.stability.bootstrap = !s.no_bootstrap;
    o.stability.replicates = s.bootstrap;
    o.clf = s.clf;
    if (!s.cu.empty()) o.cu_pairs = parse_cu_pairs(s.cu, items);
    o.fit.bound_uniqueness = s.bound_uniqueness;
    return o;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir + "'");
}

void write(const std::string& dir, const std::string& name, const std::string& content) {
    write_file_atomic((fs::path(dir) / name).string(), content);
    std::cout << "wrote " << (fs::path(dir) / name).string() << '\n';
}

AnalysisBundle analyse(const Shared& s, AnalysisStage stage) {
    Inputs in = load_inputs(s.responses, s.itemkey, s.model);
    AnalysisOptions opts = make_options(s, stage, in.key.names());
    Provenance prov;
    prov.seed = s.seed;
    prov.input_digests = {{fs::path(s.responses).filename().string(), file_digest(s.responses)},
                          {fs::path(s.itemkey).filename().string(), file_digest(s.itemkey)},
                          {fs::path(s.model).filename().string(), file_digest(s.model)}};
    AnalysisBundle b = run_analysis(std::move(in), opts, prov);
    for (const auto& w : b.validation.warnings()) std::cerr << "warning: " << w << '\n';
    ensure_dir(s.out);
    return b;
}

void write_baseline(const Shared& s, const AnalysisBundle& b) {
    write(s.out, "baseline_solution.txt", solution_text(b.baseline));
    write(s.out, "residuals.csv", residuals_csv(b.inputs.key.names(), b.baseline.residual_correlations));
}

void write_calibration(const Shared& s, const AnalysisBundle& b) {
    write(s.out, "calibration.json", calibration_json(*b.calibration, b.inputs.key.names()));
    write(s.out, "weights.csv", weights_csv(b.inputs.key.names(), b.calibration->w));
    for (const auto& w : b.calibration->warnings) std::cerr << "warning: " << w << '\n';
}

void write_fit(const Shared& s, const AnalysisBundle& b) {
    write(s.out, "famf_solution.txt", solution_text(*b.famf));
    write(s.out, "stability.csv", stability_csv(b));
    if (b.clf) write(s.out, "clf_solution.txt", solution_text(*b.clf));
    if (b.cu) write(s.out, "cu_solution.txt", solution_text(*b.cu));
    if (b.famf_cu) write(s.out, "famf_cu_solution.txt", solution_text(*b.famf_cu));
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << '\n';
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAMF-SEM: metadata-calibrated method factor for structural equation models"};
    app.require_subcommand(1);
    Shared s;

    auto* baseline = app.add_subcommand("fit-baseline", "fit the trait-only model; write solution and residuals");
    add_data_options(baseline, s);

    auto* calibrate_cmd = app.add_subcommand("calibrate", "baseline fit plus ridge calibration of method weights");
    add_data_options(calibrate_cmd, s);
    add_calibration_options(calibrate_cmd, s);
    calibrate_cmd->add_flag("--no-bootstrap", s.no_bootstrap, "skip the gamma bootstrap");

    auto* fit = app.add_subcommand("fit", "calibrate, refit with the fixed method factor and compare paths");
    add_data_options(fit, s);
    add_calibration_options(fit, s);
    add_fit_options(fit, s);

    auto* robust = app.add_subcommand("robustness", "lambda profile, leave-one-feature-out, CLF and cross-scale refits");
    add_data_options(robust, s);
    add_calibration_options(robust, s);
    add_fit_options(robust, s);

    auto* report = app.add_subcommand("report", "run the whole pipeline and write the report and every artifact");
    add_data_options(report, s);
    add_calibration_options(report, s);
    add_fit_options(report, s);

    auto* exporter = app.add_subcommand("export", "write weights.csv, the LISREL fragment and the AMOS checklist");
    add_data_options(exporter, s);
    add_calibration_options(exporter, s);
    exporter->add_flag("--no-bootstrap", s.no_bootstrap, "skip the gamma bootstrap");

    std::string design;
    std::string sim_out = "famf_sim";
    std::uint64_t sim_seed = 1;
    unsigned threads = 0;
    auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo study described by a design file");
    simulate->add_option("--design", design, "study JSON (array of conditions)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--seed", sim_seed, "master seed");
    simulate->add_option("--threads", threads, "worker threads (0 = all cores)");

    std::string cmv = "high";
    bool misaligned = false;
    std::size_t gen_n = 500;
    double gen_beta = 0.3;
    std::string gen_out = "famf_example";
    std::uint64_t gen_seed = 1;
    auto* generate = app.add_subcommand("generate-example", "write one simulated dataset as input files");
    generate->add_option("--cmv", cmv, "none|low|med|high");
    generate->add_flag("--misaligned", misaligned, "permute the metadata handed out in itemkey.csv");
    generate->add_option("--n", gen_n, "respondents");
    generate->add_option("--beta", gen_beta, "true T2~T1 coefficient");
    generate->add_option("--out", gen_out, "output directory");
    generate->add_option("--seed", gen_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::input_error);
    }

    try {
        if (baseline->parsed()) {
            auto b = analyse(s, AnalysisStage::baseline);
            write_baseline(s, b);
        } else if (calibrate_cmd->parsed()) {
            auto b = analyse(s, AnalysisStage::calibration);
            write_baseline(s, b);
            write_calibration(s, b);
        } else if (fit->parsed()) {
            auto b = analyse(s, AnalysisStage::famf);
            write_baseline(s, b);
            write_calibration(s, b);
            write_fit(s, b);
        } else if (robust->parsed()) {
            auto b = analyse(s, AnalysisStage::robustness);
            write_calibration(s, b);
            write(s.out, "robustness.json", robustness_json(*b.robustness));
        } else if (report->parsed()) {
            auto b = analyse(s, AnalysisStage::robustness);
            write_baseline(s, b);
            write_calibration(s, b);
            write_fit(s, b);
            write(s.out, "robustness.json", robustness_json(*b.robustness));
            for (const auto& p : export_artifacts(b, s.out)) std::cout << "wrote " << p << '\n';
            write(s.out, "report.md", render_report(b));
        } else if (exporter->parsed()) {
            auto b = analyse(s, AnalysisStage::calibration);
            for (const auto& p : export_artifacts(b, s.out)) std::cout << "wrote " << p << '\n';
        } else if (simulate->parsed()) {
            auto conditions = parse_study_design(read_text(design), sim_seed);
            StudyOptions so;
            so.threads = threads;
            StudyReport rep = run_study(conditions, so);
            ensure_dir(sim_out);
            write(sim_out, "results.csv", study_results_csv(rep));
            for (const auto& c : rep.conditions)
                if (c.invalid) std::cerr << "warning: condition " << c.condition.label << " invalid (>20% failed reps)\n";
        } else if (generate->parsed()) {
            SimCondition c;
            c.cmv = parse_cmv_strength(cmv);
            c.aligned = !misaligned;
            c.n = gen_n;
            c.beta_true = gen_beta;
            c.seed = gen_seed;
            SimDataset ds = generate_dataset(c, 0);
            ensure_dir(gen_out);
            write(gen_out, "responses.csv", responses_csv(ds.data));
            write(gen_out, "itemkey.csv", item_key_csv(ds.key));
            write(gen_out, "model.json", model_spec_json(ds.spec));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::input_error);
    }
    return 0;
}
