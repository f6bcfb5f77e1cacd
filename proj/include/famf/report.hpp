#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "famf/analysis.hpp"

namespace famf {

// Plain-text (markdown) report: Method, Diagnostics, Results, Attribution,
// Robustness, then provenance. Estimates at 3 decimals, weights at 6.
std::string render_report(const AnalysisBundle& bundle);

std::string weights_csv(const std::vector<std::string>& items, const Eigen::VectorXd& w);
Eigen::VectorXd parse_weights_csv(const std::string& text, const std::vector<std::string>& items);

std::string calibration_json(const CalibrationResult& c, const std::vector<std::string>& items);

// LISREL model fragment with the method column fixed to w.
std::string lisrel_fragment(const ModelSpec& spec, const std::vector<std::string>& items, const Eigen::VectorXd& w);

std::string amos_checklist(const ModelSpec& spec, const std::vector<std::string>& items, const Eigen::VectorXd& w);

// Flat "key = value" listing of estimates, SEs and fit.
std::string solution_text(const SemSolution& s);
std::string residuals_csv(const std::vector<std::string>& items, const Eigen::MatrixXd& r);
std::string stability_csv(const AnalysisBundle& bundle);
std::string robustness_json(const RobustnessReport& r);

// Serializers for the three input files (used to write generated examples).
std::string responses_csv(const ResponseMatrix& r);
std::string item_key_csv(const ItemKey& key);
std::string model_spec_json(const ModelSpec& spec);

// Writes via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

// weights.csv, lisrel_fragment.txt and amos_checklist.txt; returns the paths.
std::vector<std::string> export_artifacts(const AnalysisBundle& bundle, const std::string& out_dir);

}  // namespace famf
