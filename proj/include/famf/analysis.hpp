#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "famf/calibrator.hpp"
#include "famf/features.hpp"
#include "famf/ingest.hpp"
#include "famf/pipeline.hpp"
#include "famf/sem.hpp"

namespace famf {

inline const std::string kToolVersion = "0.1.0";

struct Provenance {
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 1;
    std::vector<std::pair<std::string, std::string>> input_digests;  // file -> fnv1a64 hex
    std::string timestamp;  // left empty unless requested; kept out of the report
};

// 64-bit FNV-1a digest as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

enum class AnalysisStage { baseline, calibration, famf, robustness };

struct AnalysisOptions {
    AnalysisStage stage = AnalysisStage::robustness;
    std::vector<std::string> features;  // subset/reorder of base features
    ExpansionSpec expansion;
    CalibrationOptions calibration;
    bool clf = false;                   // fit the CLF comparator alongside FAMF
    std::vector<ItemPair> cu_pairs;     // correlated-uniqueness sensitivity refits
    StabilityOptions stability;
    FitOptions fit;
    std::size_t pockets = 10;
};

// Everything one analysis produced, in the order the report consumes it.
struct AnalysisBundle {
    Inputs inputs;
    ValidationReport validation;
    MomentSummary moments;
    SemSolution baseline;
    std::vector<ResidualPocket> pockets;
    std::optional<FeatureMatrix> features;
    std::optional<CalibrationResult> calibration;
    std::optional<SemSolution> famf;
    std::optional<SemSolution> clf;
    std::optional<SemSolution> cu;
    std::optional<SemSolution> famf_cu;
    std::optional<DeltaBetaPanel> stability;
    std::vector<std::pair<std::string, DeltaBetaPanel>> comparator_panels;
    std::optional<RobustnessReport> robustness;
    Provenance provenance;
    std::vector<std::string> warnings;
};

// Resolves "--cu" tokens: item names or 1-based positions, "a:b".
std::vector<ItemPair> parse_cu_pairs(const std::string& text, const std::vector<std::string>& items);

// Runs the pipeline up to options.stage. Throws ConvergenceError when the
// baseline or FAMF fit does not converge and DegenerateError when the
// metadata cannot produce weights.
AnalysisBundle run_analysis(Inputs inputs, const AnalysisOptions& options, Provenance provenance = {});

}  // namespace famf
