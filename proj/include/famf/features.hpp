#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "famf/ingest.hpp"

namespace famf {

enum class FeatureKind {
    binary,   // mean-centred only
    numeric,  // z-scored, divisor k-1
};

// How one column of Z was produced from its raw source values.
struct FeatureTransform {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    double center = 0.0;
    double scale = 1.0;  // divisor applied after centring
};

struct FeatureMatrix {
    Eigen::MatrixXd Z;  // items x features
    std::vector<std::string> feature_names;
    std::vector<FeatureTransform> encoding_log;
    std::vector<std::string> warnings;

    Eigen::Index k() const { return Z.rows(); }
    Eigen::Index p() const { return Z.cols(); }
    std::optional<Eigen::Index> index_of(const std::string& name) const;
};

struct ExpansionSpec {
    std::vector<std::pair<std::string, std::string>> interactions;
    std::vector<std::pair<std::string, int>> polynomial;  // feature -> max degree

    bool empty() const { return interactions.empty() && polynomial.empty(); }
};

// The six base metadata features, in canonical column order.
const std::vector<std::string>& base_feature_names();

// Encodes the ItemKey metadata. `subset`, if non-empty, selects and orders
// base features. Zero-variance features are dropped with a warning; throws
// DegenerateError when nothing informative remains.
FeatureMatrix encode_features(const ItemKey& key, const std::vector<std::string>& subset = {});

// Re-applies a previous encoding (same centres and scales) to a different
// ItemKey, e.g. after an item is dropped.
FeatureMatrix encode_features_frozen(const ItemKey& key, const std::vector<FeatureTransform>& log);

FeatureMatrix expand_features(const FeatureMatrix& base, const ExpansionSpec& spec);

// Z without the named column (leave-one-feature-out).
FeatureMatrix drop_feature(const FeatureMatrix& features, const std::string& name);

// "a:b" -> interaction pair; "order:2" -> polynomial term.
std::pair<std::string, std::string> parse_interaction(const std::string& text);
std::pair<std::string, int> parse_polynomial(const std::string& text);

}  // namespace famf
