#include "famf/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "famf/error.hpp"

namespace famf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::size_t resolve_item(const std::string& token, const std::vector<std::string>& items) {
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i] == token) return i;
    if (!token.empty() && token.find_first_not_of("0123456789") == std::string::npos) {
        const auto pos = std::stoull(token);
        if (pos >= 1 && pos <= items.size()) return static_cast<std::size_t>(pos - 1);
    }
    throw InputError("--cu: unknown item '" + token + "'");
}

void require_converged(const SemSolution& s, const std::string& what) {
    if (!s.converged) throw ConvergenceError(what + " did not converge: " + s.message);
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

std::vector<ItemPair> parse_cu_pairs(const std::string& text, const std::vector<std::string>& items) {
    std::vector<ItemPair> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        const auto colon = tok.find(':');
        if (colon == std::string::npos) throw InputError("--cu expects i:j pairs, got '" + tok + "'");
        const std::size_t a = resolve_item(trim(tok.substr(0, colon)), items);
        const std::size_t b = resolve_item(trim(tok.substr(colon + 1)), items);
        out.emplace_back(a, b);
    }
    if (out.empty()) throw InputError("--cu given without any pair");
    return out;
}

AnalysisBundle run_analysis(Inputs inputs, const AnalysisOptions& options, Provenance provenance) {
    AnalysisBundle b;
    b.inputs = std::move(inputs);
    b.provenance = std::move(provenance);
    b.validation = validate_inputs(b.inputs.responses, b.inputs.key, b.inputs.model);
    if (b.validation.has_errors()) {
        std::string msg = "input validation failed";
        for (const auto& e : b.validation.errors()) msg += "; " + e;
        throw InputError(msg);
    }
    b.moments = sample_moments(b.inputs.responses);
    const auto items = b.inputs.key.names();
    const ModelSpec& spec = b.inputs.model;

    b.baseline = fit_variant(b.moments, spec, items, VariantSpec::baseline(), options.fit);
    require_converged(b.baseline, "baseline model");
    b.pockets = residual_pockets(b.baseline.residual_correlations, options.pockets);
    if (options.stage == AnalysisStage::baseline) return b;

    FeatureMatrix fm = encode_features(b.inputs.key, options.features);
    if (!options.expansion.empty()) fm = expand_features(fm, options.expansion);
    b.features = fm;
    CalibrationOptions co = options.calibration;
    co.seed = b.provenance.seed;
    b.calibration = calibrate(b.baseline.residual_correlations, b.inputs.key.scales(), fm, co);
    if (options.stage == AnalysisStage::calibration) return b;

    const VariantSpec famf = VariantSpec::famf(b.calibration->w);
    b.famf = fit_variant(b.moments, spec, items, famf, options.fit);
    require_converged(*b.famf, "FAMF model");

    StabilityOptions so = options.stability;
    so.seed = b.provenance.seed;
    so.fit = options.fit;
    b.stability = effect_stability(b.baseline, *b.famf, b.inputs.responses, spec, VariantSpec::baseline(), famf, so);

    StabilityOptions wald_only = so;
    wald_only.bootstrap = false;
    auto comparator = [&](const std::string& name, const VariantSpec& v, std::optional<SemSolution>& slot) {
        try {
            slot = fit_variant(b.moments, spec, items, v, options.fit);
            if (!slot->converged) {
                b.warnings.push_back(name + " comparator did not converge: " + slot->message);
                return;
            }
            b.comparator_panels.emplace_back(
                name, effect_stability(b.baseline, *slot, b.inputs.responses, spec, VariantSpec::baseline(), v,
                                       wald_only));
        } catch (const Error& e) {
            b.warnings.push_back(name + " comparator failed: " + e.what());
        }
    };
    if (options.clf) comparator("clf", VariantSpec::clf(), b.clf);
    if (!options.cu_pairs.empty()) {
        comparator("cu", VariantSpec::cu(options.cu_pairs), b.cu);
        comparator("famf_cu", VariantSpec::famf_cu(b.calibration->w, options.cu_pairs), b.famf_cu);
    }
    if (options.stage == AnalysisStage::famf) return b;

    RobustnessOptions ro;
    ro.fit = options.fit;
    ro.calibration = co;
    b.robustness = robustness_suite(b.moments, spec, b.inputs.key, fm, b.baseline, *b.calibration, ro);
    return b;
}

}  // namespace famf
