#include "famf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "famf/error.hpp"
#include "famf/internal/csv.hpp"

namespace famf {

std::optional<std::size_t> ItemKey::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::string> ItemKey::names() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.name);
    return out;
}

std::vector<std::string> ItemKey::scales() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.scale);
    return out;
}

std::vector<std::string> ModelSpec::trait_names() const {
    std::vector<std::string> out;
    for (const auto& [name, items] : traits) out.push_back(name);
    return out;
}

bool ValidationReport::has_errors() const {
    return std::any_of(issues.begin(), issues.end(),
                       [](const Issue& i) { return i.severity == Severity::error; });
}

std::vector<std::string> ValidationReport::warnings() const {
    std::vector<std::string> out;
    for (const auto& i : issues)
        if (i.severity == Severity::warning) out.push_back(i.message);
    return out;
}

std::vector<std::string> ValidationReport::errors() const {
    std::vector<std::string> out;
    for (const auto& i : issues)
        if (i.severity == Severity::error) out.push_back(i.message);
    return out;
}

namespace {

bool parse_double(const std::string& cell, double& out) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

int parse_int_field(const std::string& cell, const std::string& column, std::size_t row) {
    int v = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw InputError("itemkey row " + std::to_string(row) + ": column '" + column +
                         "' is not an integer: '" + cell + "'");
    }
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_cycle(const std::vector<std::string>& traits, const std::vector<Regression>& regs) {
    // Edge predictor -> outcome; Kahn's algorithm.
    std::map<std::string, std::set<std::string>> out_edges;
    std::map<std::string, int> indeg;
    for (const auto& t : traits) indeg[t] = 0;
    for (const auto& r : regs) {
        for (const auto& p : r.predictors) {
            if (out_edges[p].insert(r.outcome).second) indeg[r.outcome]++;
        }
    }
    std::vector<std::string> ready;
    for (const auto& [t, d] : indeg)
        if (d == 0) ready.push_back(t);
    std::size_t seen = 0;
    while (!ready.empty()) {
        auto t = ready.back();
        ready.pop_back();
        ++seen;
        for (const auto& o : out_edges[t]) {
            if (--indeg[o] == 0) ready.push_back(o);
        }
    }
    return seen != indeg.size();
}

// Checks on the model that do not need data. Appends errors to issues.
void check_model(const ModelSpec& model, const ItemKey& key, std::vector<Issue>& issues) {
    auto err = [&](std::string msg) { issues.push_back({Severity::error, std::move(msg)}); };
    std::set<std::string> traits;
    std::map<std::string, int> assigned;
    for (const auto& [trait, items] : model.traits) {
        if (!traits.insert(trait).second) err("duplicate trait '" + trait + "'");
        if (items.empty()) err("trait '" + trait + "' has no items");
        for (const auto& item : items) {
            if (!key.index_of(item)) err("unknown item '" + item + "' in model trait '" + trait + "'");
            assigned[item]++;
        }
    }
    for (const auto& it : key.items) {
        auto c = assigned.count(it.name) ? assigned[it.name] : 0;
        if (c != 1) {
            err("item '" + it.name + "' must be assigned to exactly one trait (found " +
                std::to_string(c) + ")");
        }
    }
    for (const auto& r : model.regressions) {
        if (!traits.count(r.outcome)) err("regression outcome '" + r.outcome + "' is not a trait");
        if (r.predictors.empty()) err("regression on '" + r.outcome + "' has no predictors");
        for (const auto& p : r.predictors) {
            if (!traits.count(p)) err("regression predictor '" + p + "' is not a trait");
            if (p == r.outcome) err("trait '" + p + "' regressed on itself");
        }
    }
    if (has_cycle(model.trait_names(), model.regressions)) err("regressions are cyclic");
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& [a, b] : model.residual_covariances) {
        if (a == b) {
            err("residual covariance (" + a + ", " + b + ") is a diagonal entry");
            continue;
        }
        if (!key.index_of(a) || !key.index_of(b))
            err("unknown item in residual covariance (" + a + ", " + b + ")");
        auto p = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
        if (!pairs.insert(p).second) err("duplicate residual covariance (" + a + ", " + b + ")");
    }
}

}  // namespace

ResponseMatrix parse_responses(std::istream& in) {
    auto rows = internal::read_csv(in);
    if (rows.empty()) throw InputError("responses: missing header row");
    ResponseMatrix out;
    out.item_names = rows.front();
    const std::size_t k = out.item_names.size();
    std::set<std::string> unique;
    for (const auto& name : out.item_names) {
        if (name.empty()) throw InputError("responses: empty column name in header");
        if (!unique.insert(name).second) throw InputError("responses: duplicate column '" + name + "'");
    }

    std::vector<std::vector<double>> complete;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != k) {
            throw InputError("responses row " + std::to_string(r) + ": expected " + std::to_string(k) +
                             " cells, found " + std::to_string(row.size()));
        }
        std::vector<double> vals(k);
        bool missing = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (row[c].empty()) {
                missing = true;
                continue;
            }
            if (!parse_double(row[c], vals[c])) {
                throw InputError("responses row " + std::to_string(r) + ", column '" +
                                 out.item_names[c] + "': non-numeric cell '" + row[c] + "'");
            }
        }
        if (missing) {
            ++out.dropped_rows;
        } else {
            complete.push_back(std::move(vals));
        }
    }
    out.values.resize(static_cast<Eigen::Index>(complete.size()), static_cast<Eigen::Index>(k));
    for (std::size_t r = 0; r < complete.size(); ++r)
        for (std::size_t c = 0; c < k; ++c)
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complete[r][c];
    return out;
}

ItemKey parse_item_key(std::istream& in) {
    static const std::vector<std::string> kColumns = {"item",  "scale",       "reversed", "page",
                                                      "order", "scale_width", "polarity", "length"};
    auto rows = internal::read_csv(in);
    if (rows.empty()) throw InputError("itemkey: missing header row");
    const auto& header = rows.front();
    if (header.size() != kColumns.size()) {
        throw InputError("itemkey: header must be exactly item,scale,reversed,page,order,scale_width,"
                         "polarity,length");
    }
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
    for (const auto& name : kColumns) {
        if (!col.count(name)) throw InputError("itemkey: missing column '" + name + "'");
    }

    ItemKey key;
    std::set<std::string> names;
    std::set<int> orders;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != kColumns.size()) {
            throw InputError("itemkey row " + std::to_string(r) + ": expected 8 cells, found " +
                             std::to_string(row.size()));
        }
        ItemInfo it;
        it.name = row[col["item"]];
        it.scale = row[col["scale"]];
        if (it.name.empty()) throw InputError("itemkey row " + std::to_string(r) + ": empty item name");
        if (it.scale.empty()) throw InputError("itemkey row " + std::to_string(r) + ": empty scale");
        it.reversed = parse_int_field(row[col["reversed"]], "reversed", r);
        it.page = parse_int_field(row[col["page"]], "page", r);
        it.order = parse_int_field(row[col["order"]], "order", r);
        it.scale_width = parse_int_field(row[col["scale_width"]], "scale_width", r);
        it.polarity = parse_int_field(row[col["polarity"]], "polarity", r);
        it.length = parse_int_field(row[col["length"]], "length", r);
        const std::string where = "itemkey item '" + it.name + "': ";
        if (it.reversed != 0 && it.reversed != 1) throw InputError(where + "reversed must be 0 or 1");
        if (it.polarity != 1 && it.polarity != -1) throw InputError(where + "polarity must be +1 or -1");
        if (it.page < 1 || it.order < 1 || it.scale_width < 1 || it.length < 1)
            throw InputError(where + "page, order, scale_width and length must be positive");
        if (!names.insert(it.name).second) throw InputError(where + "duplicate item");
        if (!orders.insert(it.order).second) throw InputError(where + "duplicate order value");
        key.items.push_back(std::move(it));
    }
    if (key.items.empty()) throw InputError("itemkey: no items");
    return key;
}

ModelSpec parse_model_spec(const std::string& json_text) {
    using nlohmann::ordered_json;
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw InputError(std::string("model: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("model: top level must be an object");
    ModelSpec spec;
    try {
        if (!doc.contains("traits") || !doc["traits"].is_object())
            throw InputError("model: 'traits' must be an object of trait -> item array");
        for (const auto& [name, items] : doc["traits"].items()) {
            std::vector<std::string> list;
            for (const auto& it : items) list.push_back(it.get<std::string>());
            spec.traits.emplace_back(name, std::move(list));
        }
        if (doc.contains("regressions")) {
            for (const auto& r : doc["regressions"]) {
                Regression reg;
                reg.outcome = r.at("outcome").get<std::string>();
                for (const auto& p : r.at("predictors")) reg.predictors.push_back(p.get<std::string>());
                spec.regressions.push_back(std::move(reg));
            }
        }
        if (doc.contains("residual_covariances")) {
            for (const auto& p : doc["residual_covariances"]) {
                if (!p.is_array() || p.size() != 2)
                    throw InputError("model: residual_covariances entries must be [item, item]");
                spec.residual_covariances.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
            }
        }
        if (doc.contains("identification")) {
            auto id = doc["identification"].get<std::string>();
            if (id == "unit_variance") {
                spec.identification = Identification::unit_variance;
            } else if (id == "marker") {
                spec.identification = Identification::marker;
            } else {
                throw InputError("model: identification must be 'unit_variance' or 'marker'");
            }
        }
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    }
    return spec;
}

Inputs align_inputs(ResponseMatrix responses, ItemKey key, ModelSpec model) {
    std::vector<Eigen::Index> cols;
    for (const auto& it : key.items) {
        auto pos = std::find(responses.item_names.begin(), responses.item_names.end(), it.name);
        if (pos == responses.item_names.end())
            throw InputError("unknown item '" + it.name + "': listed in itemkey but not in responses");
        cols.push_back(static_cast<Eigen::Index>(pos - responses.item_names.begin()));
    }
    for (const auto& name : responses.item_names) {
        if (!key.index_of(name))
            throw InputError("column/ItemKey mismatch: response column '" + name + "' has no itemkey row");
    }

    std::vector<Issue> issues;
    check_model(model, key, issues);
    for (const auto& i : issues) throw InputError(i.message);

    ResponseMatrix aligned;
    aligned.dropped_rows = responses.dropped_rows;
    aligned.item_names = key.names();
    aligned.values.resize(responses.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        aligned.values.col(static_cast<Eigen::Index>(c)) = responses.values.col(cols[c]);

    if (aligned.n() < aligned.k() + 1) {
        throw InputError("need at least k+1 = " + std::to_string(aligned.k() + 1) +
                         " complete respondents, have " + std::to_string(aligned.n()));
    }
    sample_moments(aligned);  // throws on zero variance or non-PD covariance
    return Inputs{std::move(aligned), std::move(key), std::move(model)};
}

Inputs load_inputs(const std::string& responses_path, const std::string& itemkey_path,
                   const std::string& modelspec_path) {
    std::istringstream resp(read_file(responses_path));
    std::istringstream key(read_file(itemkey_path));
    return align_inputs(parse_responses(resp), parse_item_key(key), parse_model_spec(read_file(modelspec_path)));
}

ValidationReport validate_inputs(const ResponseMatrix& responses, const ItemKey& key,
                                 const ModelSpec& model) {
    ValidationReport report;
    report.dropped_rows = responses.dropped_rows;
    auto warn = [&](std::string msg) { report.issues.push_back({Severity::warning, std::move(msg)}); };
    auto err = [&](std::string msg) { report.issues.push_back({Severity::error, std::move(msg)}); };

    if (responses.item_names != key.names()) err("response columns are not in itemkey order");
    if (responses.n() < responses.k() + 1) err("sample size below k+1");
    check_model(model, key, report.issues);

    if (responses.n() < 300) warn("sample below 300 (n=" + std::to_string(responses.n()) + ")");
    if (key.size() < 20 || key.size() > 40)
        warn("item count k=" + std::to_string(key.size()) + " outside the recommended range [20, 40]");
    if (responses.dropped_rows > 0)
        warn("listwise deletion removed " + std::to_string(responses.dropped_rows) + " respondent rows");

    auto constant = [&](auto field) {
        for (const auto& it : key.items)
            if (field(it) != field(key.items.front())) return false;
        return true;
    };
    if (constant([](const ItemInfo& i) { return i.reversed; })) warn("zero-variance feature: reversed");
    if (constant([](const ItemInfo& i) { return i.page; })) warn("zero-variance feature: page");
    if (constant([](const ItemInfo& i) { return i.order; })) warn("zero-variance feature: order");
    if (constant([](const ItemInfo& i) { return i.scale_width; })) warn("zero-variance feature: scale_width");
    if (constant([](const ItemInfo& i) { return i.polarity; })) warn("zero-variance feature: polarity");
    if (constant([](const ItemInfo& i) { return i.length; })) warn("zero-variance feature: length");
    return report;
}

MomentSummary sample_moments(const ResponseMatrix& responses) {
    const Eigen::Index n = responses.values.rows();
    const Eigen::Index k = responses.values.cols();
    if (n < 2) throw InputError("need at least two respondents to form a covariance");

    // Accumulate over rows in a canonical (lexicographic) order so that the
    // result does not depend on the input row order, bit for bit.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto& v = responses.values;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index c = 0; c < k; ++c) {
            if (v(a, c) != v(b, c)) return v(a, c) < v(b, c);
        }
        return false;
    });

    MomentSummary out;
    out.n = static_cast<std::size_t>(n);
    out.means = Eigen::VectorXd::Zero(k);
    for (auto r : order) out.means += v.row(r).transpose();
    out.means /= static_cast<double>(n);
    out.cov = Eigen::MatrixXd::Zero(k, k);
    for (auto r : order) {
        Eigen::VectorXd d = v.row(r).transpose() - out.means;
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) out.cov(i, j) += d(i) * d(j);
    }
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            out.cov(i, j) /= static_cast<double>(n - 1);
            out.cov(j, i) = out.cov(i, j);
        }

    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(out.cov(i, i) > 0.0)) {
            const std::string name = static_cast<std::size_t>(i) < responses.item_names.size()
                                         ? responses.item_names[static_cast<std::size_t>(i)]
                                         : std::to_string(i);
            throw NumericError("zero variance in item '" + name + "'");
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(to_correlation(out.cov));
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() < 1e-7) {
        throw NumericError("sample covariance is not positive definite (collinear items?)");
    }
    return out;
}

Eigen::MatrixXd to_correlation(const Eigen::MatrixXd& cov) {
    Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd r = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, i) = 1.0;
    return r;
}

}  // namespace famf
