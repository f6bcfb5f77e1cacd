#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace famf {

// Respondents x items, complete cases only.
struct ResponseMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> item_names;
    std::size_t dropped_rows = 0;

    std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t k() const { return static_cast<std::size_t>(values.cols()); }
};

// One questionnaire item's design metadata.
struct ItemInfo {
    std::string name;
    std::string scale;
    int reversed = 0;     // 0 or 1
    int page = 1;
    int order = 1;
    int scale_width = 5;  // number of response options
    int polarity = 1;     // +1 or -1
    int length = 1;       // word count
};

struct ItemKey {
    std::vector<ItemInfo> items;

    std::size_t size() const { return items.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
    std::vector<std::string> names() const;
    std::vector<std::string> scales() const;
};

enum class Identification { unit_variance, marker };

struct Regression {
    std::string outcome;
    std::vector<std::string> predictors;
};

struct ModelSpec {
    // Traits in declaration order; each maps to its items in listed order.
    std::vector<std::pair<std::string, std::vector<std::string>>> traits;
    std::vector<Regression> regressions;
    std::vector<std::pair<std::string, std::string>> residual_covariances;
    Identification identification = Identification::unit_variance;

    std::vector<std::string> trait_names() const;
};

struct MomentSummary {
    Eigen::MatrixXd cov;  // divisor n - 1
    Eigen::VectorXd means;
    std::size_t n = 0;
};

enum class Severity { warning, error };

struct Issue {
    Severity severity;
    std::string message;
};

struct ValidationReport {
    std::vector<Issue> issues;
    std::size_t dropped_rows = 0;

    bool has_errors() const;
    std::vector<std::string> warnings() const;
    std::vector<std::string> errors() const;
};

struct Inputs {
    ResponseMatrix responses;
    ItemKey key;
    ModelSpec model;
};

// Parsers. Each throws InputError with a message naming the offending
// row/column/item.
ResponseMatrix parse_responses(std::istream& in);
ItemKey parse_item_key(std::istream& in);
ModelSpec parse_model_spec(const std::string& json_text);

// Reads the three files, aligns the response columns to ItemKey order,
// applies listwise deletion and checks that the sample covariance is
// positive definite.
Inputs load_inputs(const std::string& responses_path, const std::string& itemkey_path,
                   const std::string& modelspec_path);

// Same as load_inputs on already-parsed objects.
Inputs align_inputs(ResponseMatrix responses, ItemKey key, ModelSpec model);

ValidationReport validate_inputs(const ResponseMatrix& responses, const ItemKey& key,
                                 const ModelSpec& model);

MomentSummary sample_moments(const ResponseMatrix& responses);

// Covariance to correlation.
Eigen::MatrixXd to_correlation(const Eigen::MatrixXd& cov);

}  // namespace famf
