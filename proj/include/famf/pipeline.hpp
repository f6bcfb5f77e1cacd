#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "famf/calibrator.hpp"
#include "famf/features.hpp"
#include "famf/ingest.hpp"
#include "famf/sem.hpp"

namespace famf {

enum class VariantKind { baseline, famf, clf, cu, famf_cu };

using ItemPair = std::pair<std::size_t, std::size_t>;

struct VariantSpec {
    VariantKind kind = VariantKind::baseline;
    Eigen::VectorXd weights;       // famf, famf_cu
    std::vector<ItemPair> pairs;   // cu, famf_cu

    static VariantSpec baseline() { return {}; }
    static VariantSpec famf(Eigen::VectorXd w) { return {VariantKind::famf, std::move(w), {}}; }
    static VariantSpec clf() { return {VariantKind::clf, {}, {}}; }
    static VariantSpec cu(std::vector<ItemPair> p) { return {VariantKind::cu, {}, std::move(p)}; }
    static VariantSpec famf_cu(Eigen::VectorXd w, std::vector<ItemPair> p) {
        return {VariantKind::famf_cu, std::move(w), std::move(p)};
    }
    std::string name() const;
};

SemStructure variant_structure(const ModelSpec& spec, const std::vector<std::string>& items, const VariantSpec& v);

// Fits one model variant. FAMF weights must have one entry per item and
// sum(w^2) = k; CLF reports |c| and warns when it collapses to zero.
SemSolution fit_variant(const MomentSummary& moments, const ModelSpec& spec, const std::vector<std::string>& items,
                        const VariantSpec& variant, const FitOptions& options = {});

// A structural quantity tracked before/after adjustment: a free trait
// regression coefficient or, when the model has none, a trait correlation.
struct PathEstimate {
    std::string label;
    double estimate = 0.0;
    double se = 0.0;
};

bool reports_correlations(const SemStructure& s);
std::vector<PathEstimate> key_paths(const SemSolution& solution);

struct DeltaBetaRow {
    std::string path;
    double before = 0.0;
    double after = 0.0;
    double delta = 0.0;
    double ci_lo = 0.0;  // bootstrap percentile interval for delta
    double ci_hi = 0.0;
    double se_before = 0.0;
    double se_after = 0.0;
    Interval wald_before;
    Interval wald_after;
};

struct DeltaBetaPanel {
    bool correlations = false;
    bool bootstrap = false;
    int replicates = 0;
    int failures = 0;
    bool unreliable = false;
    std::vector<DeltaBetaRow> rows;
};

struct StabilityOptions {
    bool bootstrap = true;
    int replicates = 500;
    std::uint64_t seed = 1;
    FitOptions fit;
};

// Before/after comparison of key paths. The bootstrap resamples respondents,
// refits both variants on each resample (weights held fixed) and reports
// percentile intervals for the difference.
DeltaBetaPanel effect_stability(const SemSolution& before, const SemSolution& after, const ResponseMatrix& data,
                                const ModelSpec& spec, const VariantSpec& before_variant,
                                const VariantSpec& after_variant, const StabilityOptions& options);

// One robustness refit: key paths, or the error that stopped it.
struct PathCell {
    bool ok = false;
    std::string error;
    std::vector<PathEstimate> paths;
    Eigen::VectorXd weights;
};

struct LambdaProfileRow {
    double lambda = 0.0;
    PathCell cell;
};

struct LofoRow {
    std::string omitted;
    PathCell cell;
};

struct RobustnessReport {
    std::vector<LambdaProfileRow> lambda_profile;
    std::vector<LofoRow> lofo;
    PathCell clf;
    bool cross_scale_applicable = false;
    PathCell cross_scale;
};

struct RobustnessOptions {
    FitOptions fit;
    CalibrationOptions calibration;  // grid, rule and orientation reused for recalibration
};

RobustnessReport robustness_suite(const MomentSummary& moments, const ModelSpec& spec, const ItemKey& key,
                                  const FeatureMatrix& features, const SemSolution& baseline,
                                  const CalibrationResult& calibration, const RobustnessOptions& options);

}  // namespace famf
