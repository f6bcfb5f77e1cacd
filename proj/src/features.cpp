#include "famf/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "famf/error.hpp"

namespace famf {

namespace {

constexpr double kZeroVariance = 1e-12;

struct RawColumn {
    std::string name;
    FeatureKind kind;
    Eigen::VectorXd values;
};

Eigen::VectorXd raw_values(const ItemKey& key, const std::string& name) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(key.size()));
    for (std::size_t i = 0; i < key.size(); ++i) {
        const auto& it = key.items[i];
        double x = 0.0;
        if (name == "reversed") {
            x = it.reversed;
        } else if (name == "page") {
            x = it.page;
        } else if (name == "order") {
            x = it.order;
        } else if (name == "scale_width") {
            x = it.scale_width;
        } else if (name == "polarity") {
            x = it.polarity;
        } else if (name == "length") {
            x = it.length;
        } else {
            throw InputError("unknown feature '" + name + "'");
        }
        v(static_cast<Eigen::Index>(i)) = x;
    }
    return v;
}

FeatureKind kind_of(const std::string& name) {
    return (name == "reversed" || name == "polarity") ? FeatureKind::binary : FeatureKind::numeric;
}

double sample_sd(const Eigen::VectorXd& centred) {
    const auto k = centred.size();
    if (k < 2) return 0.0;
    return std::sqrt(centred.squaredNorm() / static_cast<double>(k - 1));
}

// Centres (and for numeric columns scales) v; returns false if v is constant.
bool standardize(Eigen::VectorXd& v, FeatureKind kind, FeatureTransform& t) {
    t.kind = kind;
    t.center = v.mean();
    v.array() -= t.center;
    double sd = sample_sd(v);
    if (sd <= kZeroVariance * std::max(1.0, std::abs(t.center))) return false;
    t.scale = kind == FeatureKind::numeric ? sd : 1.0;
    v /= t.scale;
    return true;
}

bool duplicates_existing(const Eigen::MatrixXd& Z, Eigen::Index cols, const Eigen::VectorXd& v) {
    for (Eigen::Index c = 0; c < cols; ++c) {
        double denom = Z.col(c).norm() * v.norm();
        if (denom > 0.0 && std::abs(Z.col(c).dot(v)) / denom > 1.0 - 1e-10) return true;
    }
    return false;
}

void append_column(FeatureMatrix& fm, const Eigen::VectorXd& v, FeatureTransform t) {
    fm.Z.conservativeResize(v.size(), fm.Z.cols() + 1);
    fm.Z.col(fm.Z.cols() - 1) = v;
    fm.feature_names.push_back(t.name);
    fm.encoding_log.push_back(std::move(t));
}

}  // namespace

std::optional<Eigen::Index> FeatureMatrix::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return static_cast<Eigen::Index>(i);
    return std::nullopt;
}

const std::vector<std::string>& base_feature_names() {
    static const std::vector<std::string> names = {"reversed",    "page",     "order",
                                                   "scale_width", "polarity", "length"};
    return names;
}

FeatureMatrix encode_features(const ItemKey& key, const std::vector<std::string>& subset) {
    const auto& wanted = subset.empty() ? base_feature_names() : subset;
    std::set<std::string> seen;
    FeatureMatrix fm;
    fm.Z.resize(static_cast<Eigen::Index>(key.size()), 0);
    for (const auto& name : wanted) {
        if (!seen.insert(name).second) throw InputError("feature '" + name + "' requested twice");
        Eigen::VectorXd v = raw_values(key, name);
        FeatureTransform t{name, kind_of(name), 0.0, 1.0};
        if (!standardize(v, t.kind, t)) {
            fm.warnings.push_back("zero-variance feature dropped: " + name);
            continue;
        }
        append_column(fm, v, std::move(t));
    }
    if (fm.p() == 0) throw DegenerateError("metadata uninformative: every feature is constant");
    return fm;
}

FeatureMatrix encode_features_frozen(const ItemKey& key, const std::vector<FeatureTransform>& log) {
    FeatureMatrix fm;
    fm.Z.resize(static_cast<Eigen::Index>(key.size()), 0);
    for (const auto& t : log) {
        if (std::find(base_feature_names().begin(), base_feature_names().end(), t.name) ==
            base_feature_names().end()) {
            throw InputError("frozen encoding only supports base features, got '" + t.name + "'");
        }
        Eigen::VectorXd v = raw_values(key, t.name);
        v = (v.array() - t.center) / t.scale;
        append_column(fm, v, t);
    }
    return fm;
}

FeatureMatrix expand_features(const FeatureMatrix& base, const ExpansionSpec& spec) {
    FeatureMatrix out = base;
    auto column = [&](const std::string& name) -> Eigen::VectorXd {
        auto idx = base.index_of(name);
        if (!idx) throw InputError("expansion references unknown feature '" + name + "'");
        return base.Z.col(*idx);
    };
    auto add = [&](Eigen::VectorXd v, const std::string& name) {
        FeatureTransform t{name, FeatureKind::numeric, 0.0, 1.0};
        if (!standardize(v, FeatureKind::numeric, t)) {
            out.warnings.push_back("zero-variance expansion dropped: " + name);
            return;
        }
        if (duplicates_existing(out.Z, out.Z.cols(), v)) {
            out.warnings.push_back("duplicate expansion dropped: " + name);
            return;
        }
        append_column(out, v, std::move(t));
    };

    for (const auto& [a, b] : spec.interactions) {
        if (a == b) {
            throw InputError("interaction " + a + ":" + b +
                             " duplicates a polynomial term; use --poly " + a + ":2");
        }
        add(column(a).cwiseProduct(column(b)), a + "*" + b);
    }
    for (const auto& [name, degree] : spec.polynomial) {
        if (degree < 2) throw InputError("polynomial degree for '" + name + "' must be at least 2");
        Eigen::VectorXd parent = column(name);
        for (int d = 2; d <= degree; ++d) {
            add(parent.array().pow(d).matrix(), name + "^" + std::to_string(d));
        }
    }
    return out;
}

FeatureMatrix drop_feature(const FeatureMatrix& features, const std::string& name) {
    auto idx = features.index_of(name);
    if (!idx) throw InputError("cannot drop unknown feature '" + name + "'");
    FeatureMatrix out;
    out.Z.resize(features.k(), features.p() - 1);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < features.p(); ++j) {
        if (j == *idx) continue;
        out.Z.col(c++) = features.Z.col(j);
        out.feature_names.push_back(features.feature_names[static_cast<std::size_t>(j)]);
        out.encoding_log.push_back(features.encoding_log[static_cast<std::size_t>(j)]);
    }
    return out;
}

std::pair<std::string, std::string> parse_interaction(const std::string& text) {
    auto pos = text.find(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == text.size())
        throw InputError("interaction must look like a:b, got '" + text + "'");
    return {text.substr(0, pos), text.substr(pos + 1)};
}

std::pair<std::string, int> parse_polynomial(const std::string& text) {
    auto pos = text.find(':');
    if (pos == std::string::npos || pos == 0)
        throw InputError("polynomial must look like feature:degree, got '" + text + "'");
    try {
        std::size_t used = 0;
        int degree = std::stoi(text.substr(pos + 1), &used);
        if (used != text.size() - pos - 1) throw std::invalid_argument("trailing");
        return {text.substr(0, pos), degree};
    } catch (const std::exception&) {
        throw InputError("polynomial degree is not an integer in '" + text + "'");
    }
}

}  // namespace famf
