#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "famf/ingest.hpp"

namespace famf {

enum class CmvStrength { none, low, med, high };

// Mean method-variance share of a unit-variance item.
double cmv_share(CmvStrength s);
std::string to_string(CmvStrength s);
CmvStrength parse_cmv_strength(const std::string& text);

struct SimCondition {
    std::string label;
    CmvStrength cmv = CmvStrength::none;
    bool aligned = true;
    std::size_t n = 500;
    double beta_true = 0.3;
    bool misspecified = false;
    int reps = 200;
    std::uint64_t seed = 1;
};

struct TruthRecord {
    Eigen::VectorXd lambda;          // loading of each item on its own trait
    Eigen::VectorXd w;               // true method loadings
    Eigen::VectorXd theta;           // uniquenesses
    std::vector<std::string> gamma_features;
    Eigen::VectorXd gamma;
    double a0 = 0.0;
    Eigen::MatrixXd psi;             // covariance of (eta1, standardized eta2)
    double beta = 0.0;
    std::vector<int> trait;          // 0 or 1 per item
    std::optional<std::size_t> cross_loading_item;  // loads 0.3 on trait 2 as well
    ItemKey generating_key;          // metadata used to build w
    Eigen::MatrixXd population_cov;  // implied covariance of one respondent row
};

struct SimDataset {
    ResponseMatrix data;
    ItemKey key;  // metadata handed to the calibrator (permuted when misaligned)
    ModelSpec spec;
    TruthRecord truth;
};

// Two interleaved traits of 12 items each (odd questionnaire positions on T1),
// T2 ~ T1. The replicate stream is keyed by (condition seed, condition index,
// replicate).
SimDataset generate_dataset(const SimCondition& condition, std::size_t rep, std::size_t condition_index = 0);

enum class SimMethod { baseline, clf, famf, oracle };
inline constexpr std::array<SimMethod, 4> kSimMethods = {SimMethod::baseline, SimMethod::clf, SimMethod::famf,
                                                         SimMethod::oracle};
std::string to_string(SimMethod m);

struct MethodSummary {
    SimMethod method = SimMethod::baseline;
    int reps = 0;
    int successes = 0;
    int failures = 0;        // exceptions plus non-convergence
    int nonconverged = 0;
    double bias = 0.0;
    double mse = 0.0;
    double rejection_rate = 0.0;
    double coverage = 0.0;
    std::vector<double> estimates;  // per replicate; NaN marks a failure
    std::vector<double> ses;
};

struct ConditionResult {
    SimCondition condition;
    std::array<MethodSummary, 4> methods;
    bool invalid = false;  // more than 20% failed replicates for some method

    const MethodSummary& method(SimMethod m) const { return methods[static_cast<std::size_t>(m)]; }
};

struct StudyReport {
    std::vector<ConditionResult> conditions;
};

struct StudyOptions {
    unsigned threads = 0;  // 0 = hardware concurrency
};

ConditionResult run_condition(const SimCondition& condition, std::size_t condition_index,
                              const StudyOptions& options = {});
StudyReport run_study(const std::vector<SimCondition>& design, const StudyOptions& options = {});

// Array of condition objects. `seed` in a condition overrides master_seed.
std::vector<SimCondition> parse_study_design(const std::string& json_text, std::uint64_t master_seed);

std::string study_results_csv(const StudyReport& report);

}  // namespace famf
