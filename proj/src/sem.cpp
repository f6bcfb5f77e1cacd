#include "famf/sem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "famf/error.hpp"

namespace famf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd fill(const CellMatrix& cells, const Eigen::VectorXd& params) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(cells.rows()), static_cast<Eigen::Index>(cells.cols()));
    for (std::size_t r = 0; r < cells.rows(); ++r)
        for (std::size_t c = 0; c < cells.cols(); ++c) {
            const Cell& cell = cells(r, c);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                cell.is_free() ? params(cell.param) : cell.value;
        }
    return m;
}

void set_symmetric(CellMatrix& m, std::size_t a, std::size_t b, Cell cell) {
    m(a, b) = cell;
    m(b, a) = cell;
}

Eigen::MatrixXd inverse_i_minus_b(const Eigen::MatrixXd& B) {
    const Eigen::Index m = B.rows();
    if (m == 0 || B.isZero(0.0)) return Eigen::MatrixXd::Identity(m, m);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(m, m) - B);
    if (!lu.isInvertible()) throw NumericError("(I - B) is not invertible");
    return lu.inverse();
}

// Reflects latent variables whose loadings are all free so that their
// loadings sum to a non-negative value. The reflection leaves Sigma
// unchanged; it removes the sign indeterminacy of unit-variance scaling.
void normalize_signs(const SemStructure& s, Eigen::VectorXd& params) {
    const std::size_t m = s.latents.size();
    std::vector<int> sign(m, 1);
    auto p = fill_matrices(s, params);
    for (std::size_t t = 0; t < m; ++t) {
        bool flippable = true;
        bool any_free = false;
        for (std::size_t i = 0; i < s.k(); ++i) {
            const Cell& c = s.loadings(i, t);
            if (c.is_free()) {
                any_free = true;
            } else if (c.value != 0.0) {
                flippable = false;
            }
        }
        if (flippable && any_free && p.loadings.col(static_cast<Eigen::Index>(t)).sum() < 0.0) sign[t] = -1;
    }
    if (std::all_of(sign.begin(), sign.end(), [](int v) { return v == 1; })) return;

    // Sign each parameter must take; a parameter whose cells disagree blocks
    // the reflection altogether.
    std::vector<int> param_sign(s.free_parameters(), 0);
    bool consistent = true;
    auto visit = [&](const CellMatrix& cells, auto cell_sign) {
        for (std::size_t r = 0; r < cells.rows(); ++r)
            for (std::size_t c = 0; c < cells.cols(); ++c) {
                const Cell& cell = cells(r, c);
                if (!cell.is_free()) continue;
                int sg = cell_sign(r, c);
                auto& ps = param_sign[static_cast<std::size_t>(cell.param)];
                if (ps == 0) {
                    ps = sg;
                } else if (ps != sg) {
                    consistent = false;
                }
            }
    };
    visit(s.loadings, [&](std::size_t, std::size_t c) { return sign[c]; });
    visit(s.regressions, [&](std::size_t r, std::size_t c) { return sign[r] * sign[c]; });
    visit(s.latent_cov, [&](std::size_t r, std::size_t c) { return sign[r] * sign[c]; });
    visit(s.residual_cov, [](std::size_t, std::size_t) { return 1; });
    // Fixed non-zero cells in B or Psi linking latents of different signs
    // would change under reflection.
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) {
            if (sign[r] * sign[c] == 1) continue;
            if (!s.regressions(r, c).is_free() && s.regressions(r, c).value != 0.0) consistent = false;
            if (!s.latent_cov(r, c).is_free() && s.latent_cov(r, c).value != 0.0) consistent = false;
        }
    if (!consistent) return;
    for (std::size_t i = 0; i < param_sign.size(); ++i)
        if (param_sign[i] == -1) params(static_cast<Eigen::Index>(i)) = -params(static_cast<Eigen::Index>(i));
}

}  // namespace

std::optional<std::size_t> SemStructure::param_index(const std::string& label) const {
    for (std::size_t i = 0; i < param_labels.size(); ++i)
        if (param_labels[i] == label) return i;
    return std::nullopt;
}

std::optional<std::size_t> SemStructure::latent_index(const std::string& name) const {
    for (std::size_t i = 0; i < latents.size(); ++i)
        if (latents[i] == name) return i;
    return std::nullopt;
}

int SemStructure::add_param(const std::string& label) {
    param_labels.push_back(label);
    return static_cast<int>(param_labels.size() - 1);
}

SemStructure build_structure(const ModelSpec& spec, const std::vector<std::string>& items,
                             const MethodFactor& method) {
    SemStructure s;
    s.items = items;
    s.identification = spec.identification;
    s.method_enabled = method.kind != MethodKind::none;
    s.latents = spec.trait_names();
    if (s.method_enabled) s.latents.push_back(kMethodLatent);
    const std::size_t k = items.size();
    const std::size_t m = s.latents.size();
    const std::size_t q = spec.traits.size();
    s.loadings = CellMatrix(k, m);
    s.regressions = CellMatrix(m, m);
    s.latent_cov = CellMatrix(m, m);
    s.residual_cov = CellMatrix(k, k);

    auto item_index = [&](const std::string& name) {
        auto pos = std::find(items.begin(), items.end(), name);
        if (pos == items.end()) throw InputError("unknown item '" + name + "' in model");
        return static_cast<std::size_t>(pos - items.begin());
    };

    for (std::size_t t = 0; t < q; ++t) {
        const auto& [trait, trait_items] = spec.traits[t];
        for (std::size_t j = 0; j < trait_items.size(); ++j) {
            std::size_t i = item_index(trait_items[j]);
            if (spec.identification == Identification::marker && j == 0) {
                s.loadings(i, t) = Cell{-1, 1.0};
            } else {
                s.loadings(i, t).param = s.add_param(trait + "=~" + trait_items[j]);
            }
        }
    }

    std::vector<bool> endogenous(m, false);
    for (const auto& reg : spec.regressions) {
        auto out = s.latent_index(reg.outcome);
        if (!out) throw InputError("regression outcome '" + reg.outcome + "' is not a trait");
        endogenous[*out] = true;
        for (const auto& pred : reg.predictors) {
            auto in = s.latent_index(pred);
            if (!in) throw InputError("regression predictor '" + pred + "' is not a trait");
            s.regressions(*out, *in).param = s.add_param(reg.outcome + "~" + pred);
        }
    }

    for (std::size_t t = 0; t < q; ++t) {
        if (spec.identification == Identification::unit_variance) {
            s.latent_cov(t, t) = Cell{-1, 1.0};
        } else {
            s.latent_cov(t, t).param = s.add_param(s.latents[t] + "~~" + s.latents[t]);
        }
    }
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a + 1; b < q; ++b) {
            if (endogenous[a] || endogenous[b]) continue;
            set_symmetric(s.latent_cov, a, b, Cell{s.add_param(s.latents[a] + "~~" + s.latents[b]), 0.0});
        }

    for (std::size_t i = 0; i < k; ++i) s.residual_cov(i, i).param = s.add_param(items[i] + "~~" + items[i]);
    for (const auto& [a, b] : spec.residual_covariances) {
        std::size_t i = item_index(a), j = item_index(b);
        if (i == j) throw InputError("residual covariance (" + a + ", " + b + ") is a diagonal entry");
        if (s.residual_cov(i, j).is_free()) throw InputError("duplicate residual covariance (" + a + ", " + b + ")");
        set_symmetric(s.residual_cov, i, j, Cell{s.add_param(a + "~~" + b), 0.0});
    }

    if (s.method_enabled) {
        const std::size_t mi = m - 1;
        s.latent_cov(mi, mi) = Cell{-1, 1.0};
        if (method.kind == MethodKind::fixed_weights) {
            if (static_cast<std::size_t>(method.weights.size()) != k)
                throw InputError("method weights have " + std::to_string(method.weights.size()) +
                                 " entries for " + std::to_string(k) + " items");
            for (std::size_t i = 0; i < k; ++i)
                s.loadings(i, mi) = Cell{-1, method.weights(static_cast<Eigen::Index>(i))};
        } else {
            int c = s.add_param(kMethodLatent + "=~all");
            for (std::size_t i = 0; i < k; ++i) s.loadings(i, mi).param = c;
        }
    }
    return s;
}

SemStructure independence_structure(const std::vector<std::string>& items) {
    SemStructure s;
    s.items = items;
    s.loadings = CellMatrix(items.size(), 0);
    s.regressions = CellMatrix(0, 0);
    s.latent_cov = CellMatrix(0, 0);
    s.residual_cov = CellMatrix(items.size(), items.size());
    for (std::size_t i = 0; i < items.size(); ++i) s.residual_cov(i, i).param = s.add_param(items[i] + "~~" + items[i]);
    return s;
}

SemStructure free_residual_covariance(const SemStructure& s, std::size_t i, std::size_t j) {
    if (i >= s.k() || j >= s.k()) throw InputError("residual covariance index out of range");
    if (i == j) throw InputError("diagonal already free: (" + s.items[i] + ", " + s.items[j] + ")");
    if (s.residual_cov(i, j).is_free())
        throw InputError("duplicate request: residual covariance (" + s.items[i] + ", " + s.items[j] +
                         ") is already free");
    SemStructure out = s;
    std::size_t a = std::min(i, j), b = std::max(i, j);
    set_symmetric(out.residual_cov, a, b, Cell{out.add_param(s.items[a] + "~~" + s.items[b]), 0.0});
    return out;
}

ModelMatrices fill_matrices(const SemStructure& s, const Eigen::VectorXd& params) {
    return {fill(s.loadings, params), fill(s.regressions, params), fill(s.latent_cov, params),
            fill(s.residual_cov, params)};
}

Eigen::MatrixXd latent_covariance(const ModelMatrices& m) {
    Eigen::MatrixXd A = inverse_i_minus_b(m.regressions);
    return A * m.latent_cov * A.transpose();
}

Eigen::MatrixXd implied_covariance(const Eigen::VectorXd& params, const SemStructure& s) {
    if (static_cast<std::size_t>(params.size()) != s.free_parameters())
        throw InputError("parameter vector has " + std::to_string(params.size()) + " entries, structure has " +
                         std::to_string(s.free_parameters()));
    auto m = fill_matrices(s, params);
    Eigen::MatrixXd sigma = m.residual_cov;
    if (m.loadings.cols() > 0) sigma.noalias() += m.loadings * latent_covariance(m) * m.loadings.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

double fml_discrepancy(const Eigen::MatrixXd& S, const Eigen::MatrixXd& sigma) {
    if (S.rows() != sigma.rows() || S.cols() != sigma.cols() || S.rows() != S.cols())
        throw InputError("fml_discrepancy: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> ls(S), lz(sigma);
    if (ls.info() != Eigen::Success) throw NumericError("fml_discrepancy: S is not positive definite");
    if (lz.info() != Eigen::Success) throw NumericError("fml_discrepancy: Sigma is not positive definite");
    const double logdet_s = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
    const double logdet_z = 2.0 * lz.matrixLLT().diagonal().array().log().sum();
    const double trace = lz.solve(S).trace();
    return logdet_z + trace - logdet_s - static_cast<double>(S.rows());
}

Eigen::VectorXd start_values(const SemStructure& s, const Eigen::MatrixXd& S) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.free_parameters()));
    std::vector<bool> set(s.free_parameters(), false);
    auto assign = [&](int p, double v) {
        if (p >= 0 && !set[static_cast<std::size_t>(p)]) {
            x(p) = v;
            set[static_cast<std::size_t>(p)] = true;
        }
    };
    const std::size_t m = s.latents.size();
    // Marker variance per latent (the variance of its fixed-loading item).
    std::vector<double> marker_var(m, 1.0);
    for (std::size_t t = 0; t < m; ++t)
        for (std::size_t i = 0; i < s.k(); ++i) {
            const Cell& c = s.loadings(i, t);
            if (!c.is_free() && c.value == 1.0 && s.identification == Identification::marker) {
                marker_var[t] = S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
                break;
            }
        }
    const bool marker = s.identification == Identification::marker;
    for (std::size_t t = 0; t < m; ++t) {
        const bool method = s.method_enabled && t + 1 == m;
        for (std::size_t i = 0; i < s.k(); ++i) {
            const double sii = S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
            double v = marker ? std::sqrt(sii / marker_var[t]) : 0.7 * std::sqrt(sii);
            if (method) v = 0.3 * std::sqrt(sii);
            assign(s.loadings(i, t).param, v);
        }
    }
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            const double va = marker ? 0.49 * marker_var[a] : 1.0;
            const double vb = marker ? 0.49 * marker_var[b] : 1.0;
            assign(s.latent_cov(a, b).param, a == b ? va : 0.2 * std::sqrt(va * vb));
            assign(s.regressions(a, b).param, 0.0);
        }
    for (std::size_t i = 0; i < s.k(); ++i)
        for (std::size_t j = 0; j < s.k(); ++j)
            assign(s.residual_cov(i, j).param,
                   i == j ? 0.5 * S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) : 0.0);
    return x;
}

MlObjective::MlObjective(const SemStructure& s, const Eigen::MatrixXd& S) : s_(&s), S_(S) {
    Eigen::LLT<Eigen::MatrixXd> ls(S_);
    if (ls.info() != Eigen::Success) throw NumericError("sample covariance is not positive definite");
    logdet_S_ = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
    auto collect = [](const CellMatrix& cells, std::vector<FreeCell>& out) {
        for (std::size_t r = 0; r < cells.rows(); ++r)
            for (std::size_t c = 0; c < cells.cols(); ++c)
                if (cells(r, c).is_free())
                    out.push_back({static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), cells(r, c).param});
    };
    collect(s.loadings, lambda_);
    collect(s.regressions, beta_);
    collect(s.latent_cov, psi_);
    collect(s.residual_cov, theta_);
    for (std::size_t r = 0; r < s.regressions.rows(); ++r)
        for (std::size_t c = 0; c < s.regressions.cols(); ++c)
            if (s.regressions(r, c).is_free() || s.regressions(r, c).value != 0.0) has_regressions_ = true;
}

double MlObjective::operator()(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const {
    const auto m = fill_matrices(*s_, params);
    const Eigen::Index k = S_.rows();
    Eigen::MatrixXd A;
    if (has_regressions_) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(m.regressions.rows(), m.regressions.cols()) -
                                             m.regressions);
        if (!lu.isInvertible()) return kInf;
        A = lu.inverse();
    } else {
        A = Eigen::MatrixXd::Identity(m.regressions.rows(), m.regressions.cols());
    }
    const Eigen::MatrixXd C = A * m.latent_cov * A.transpose();
    Eigen::MatrixXd sigma = m.residual_cov;
    if (m.loadings.cols() > 0) sigma.noalias() += m.loadings * C * m.loadings.transpose();
    sigma = 0.5 * (sigma + sigma.transpose());

    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return kInf;
    const auto diag = llt.matrixLLT().diagonal();
    if (diag.minCoeff() <= 0.0) return kInf;
    const double logdet = 2.0 * diag.array().log().sum();
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd inv_s = inv * S_;
    const double f = logdet + inv_s.trace() - logdet_S_ - static_cast<double>(k);
    if (!std::isfinite(f)) return kInf;

    if (grad) {
        grad->setZero(params.size());
        // dF/dSigma = Sigma^-1 - Sigma^-1 S Sigma^-1
        Eigen::MatrixXd G = inv - inv_s * inv;
        G = 0.5 * (G + G.transpose());
        for (const auto& fc : theta_) (*grad)(fc.param) += G(fc.r, fc.c);
        if (m.loadings.cols() > 0) {
            const Eigen::MatrixXd GL = G * m.loadings;
            if (!lambda_.empty()) {
                const Eigen::MatrixXd GLC = GL * C;
                for (const auto& fc : lambda_) (*grad)(fc.param) += 2.0 * GLC(fc.r, fc.c);
            }
            if (!psi_.empty() || !beta_.empty()) {
                const Eigen::MatrixXd LGL = m.loadings.transpose() * GL;
                const Eigen::MatrixXd ALGLA = A.transpose() * LGL * A;
                for (const auto& fc : psi_) (*grad)(fc.param) += ALGLA(fc.r, fc.c);
                if (!beta_.empty()) {
                    const Eigen::MatrixXd DB = ALGLA * m.latent_cov * A.transpose();
                    for (const auto& fc : beta_) (*grad)(fc.param) += 2.0 * DB(fc.r, fc.c);
                }
            }
        }
    }
    return f;
}

Objective MlObjective::as_objective() const {
    return [this](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return (*this)(x, g); };
}

double SemSolution::estimate(const std::string& label) const {
    auto idx = structure.param_index(label);
    if (!idx) throw InputError("no parameter labelled '" + label + "'");
    return estimates(static_cast<Eigen::Index>(*idx));
}

Eigen::MatrixXd SemSolution::standardized_loadings() const {
    auto m = matrices();
    Eigen::MatrixXd C = latent_covariance(m);
    Eigen::MatrixXd out = m.loadings;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index t = 0; t < out.cols(); ++t)
            out(i, t) = m.loadings(i, t) * std::sqrt(std::max(C(t, t), 0.0)) / std::sqrt(implied(i, i));
    return out;
}

SemSolution fit_model(const MomentSummary& moments, const SemStructure& s, const FitOptions& options) {
    if (static_cast<std::size_t>(moments.cov.rows()) != s.k())
        throw InputError("covariance has " + std::to_string(moments.cov.rows()) + " items, structure has " +
                         std::to_string(s.k()));
    if (s.df() < 0) {
        throw InputError("model not identified: " + std::to_string(s.free_parameters()) +
                         " free parameters exceed " + std::to_string(s.moments()) + " moments (df = " +
                         std::to_string(s.df()) + ")");
    }
    if (moments.n < 2) throw InputError("need n >= 2 for a covariance fit");

    SemSolution sol;
    sol.structure = s;
    sol.n = moments.n;
    sol.sample_cov = moments.cov;
    sol.df = s.df();

    MlObjective objective(sol.structure, moments.cov);
    const Objective f = objective.as_objective();
    Eigen::VectorXd x0 = options.start ? *options.start : start_values(s, moments.cov);
    if (static_cast<std::size_t>(x0.size()) != s.free_parameters()) throw InputError("start vector has wrong length");

    BfgsOptions bo = options.bfgs;
    if (options.bound_uniqueness) {
        bo.lower_bounds = Eigen::VectorXd::Constant(x0.size(), -kInf);
        for (std::size_t i = 0; i < s.k(); ++i) {
            const Cell& c = s.residual_cov(i, i);
            if (c.is_free()) bo.lower_bounds(c.param) = *options.bound_uniqueness;
        }
    }
    if (!std::isfinite(f(x0, nullptr))) {
        // Inflate uniquenesses until the start is feasible.
        for (int attempt = 0; attempt < 30 && !std::isfinite(f(x0, nullptr)); ++attempt) {
            for (std::size_t i = 0; i < s.k(); ++i) {
                const Cell& c = s.residual_cov(i, i);
                if (c.is_free()) x0(c.param) = x0(c.param) * 2.0 + 1e-3;
            }
        }
        if (!std::isfinite(f(x0, nullptr)))
            throw NumericError("implied covariance is not positive definite at the start values");
    }

    BfgsResult r = minimize_bfgs(f, x0, bo);
    sol.estimates = r.x;
    normalize_signs(sol.structure, sol.estimates);
    sol.converged = r.converged;
    sol.iterations = r.iterations;
    sol.gradient_norm = r.gradient_norm;
    sol.message = r.message;
    sol.f_min = f(sol.estimates, nullptr);
    sol.chi_square = static_cast<double>(moments.n - 1) * sol.f_min;
    sol.implied = implied_covariance(sol.estimates, sol.structure);
    sol.residual_correlations = to_correlation(moments.cov) - to_correlation(sol.implied);
    for (Eigen::Index i = 0; i < sol.residual_correlations.rows(); ++i) sol.residual_correlations(i, i) = 0.0;
    sol.residual_correlations = 0.5 * (sol.residual_correlations + sol.residual_correlations.transpose());

    if (!sol.converged) sol.warnings.push_back("optimizer did not converge: " + r.message);
    for (std::size_t i = 0; i < s.k(); ++i) {
        const Cell& c = s.residual_cov(i, i);
        double v = c.is_free() ? sol.estimates(c.param) : c.value;
        if (v < 0.0) sol.warnings.push_back("Heywood case: negative uniqueness for item " + s.items[i]);
    }

    const Eigen::Index np = sol.estimates.size();
    sol.se = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
    sol.acov = Eigen::MatrixXd::Constant(np, np, std::numeric_limits<double>::quiet_NaN());
    if (options.compute_se && np > 0) {
        Eigen::MatrixXd H = central_difference_hessian(f, sol.estimates);
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (H.allFinite() && llt.info() == Eigen::Success) {
            sol.acov = (2.0 / static_cast<double>(moments.n - 1)) * llt.solve(Eigen::MatrixXd::Identity(np, np));
            sol.se = sol.acov.diagonal().cwiseMax(0.0).cwiseSqrt();
        } else {
            sol.warnings.push_back("Hessian not positive definite; standard errors unavailable");
        }
    }

    if (options.compute_fit_indices) {
        SemSolution null_sol = fit_null_model(moments);
        if (null_sol.df > 0) sol.fit = fit_indices(sol, null_sol);
    }
    return sol;
}

SemSolution fit_null_model(const MomentSummary& moments) {
    std::vector<std::string> items;
    for (Eigen::Index i = 0; i < moments.cov.rows(); ++i) items.push_back("y" + std::to_string(i + 1));
    SemSolution sol;
    sol.structure = independence_structure(items);
    sol.n = moments.n;
    sol.sample_cov = moments.cov;
    sol.df = sol.structure.df();
    sol.estimates = moments.cov.diagonal();
    sol.implied = moments.cov.diagonal().asDiagonal();
    sol.f_min = fml_discrepancy(moments.cov, sol.implied);
    sol.chi_square = static_cast<double>(moments.n - 1) * sol.f_min;
    sol.residual_correlations = to_correlation(moments.cov);
    for (Eigen::Index i = 0; i < sol.residual_correlations.rows(); ++i) sol.residual_correlations(i, i) = 0.0;
    sol.converged = true;
    sol.message = "closed form";
    return sol;
}

FitIndices fit_indices(const SemSolution& model, const SemSolution& null_solution) {
    if (null_solution.df <= 0) throw InputError("fit indices need a baseline model with df > 0");
    FitIndices fi;
    fi.chi_square_null = null_solution.chi_square;
    fi.df_null = null_solution.df;
    const double chi_m = model.chi_square, chi_b = null_solution.chi_square;
    const double df_m = model.df, df_b = null_solution.df;

    const double num = std::max(chi_m - df_m, 0.0);
    const double den = std::max({chi_b - df_b, chi_m - df_m, 0.0});
    fi.cfi = den > 0.0 ? 1.0 - num / den : 1.0;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double ratio_b = chi_b / df_b;
    fi.tli = (df_m > 0 && ratio_b != 1.0) ? (ratio_b - chi_m / df_m) / (ratio_b - 1.0) : nan;
    fi.rmsea = df_m > 0 ? std::sqrt(num / (df_m * static_cast<double>(model.n - 1))) : nan;
    fi.srmr = srmr(model.residual_correlations);
    return fi;
}

double srmr(const Eigen::MatrixXd& r) {
    const Eigen::Index k = r.rows();
    if (k < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 1; i < k; ++i)
        for (Eigen::Index j = 0; j < i; ++j) sum += r(i, j) * r(i, j);
    return std::sqrt(sum / static_cast<double>(k * (k - 1) / 2));
}

std::vector<ResidualPocket> residual_pockets(const Eigen::MatrixXd& r, std::size_t count) {
    std::vector<ResidualPocket> all;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = i + 1; j < r.cols(); ++j)
            all.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), r(i, j)});
    std::stable_sort(all.begin(), all.end(), [](const ResidualPocket& a, const ResidualPocket& b) {
        const double fa = std::abs(a.r), fb = std::abs(b.r);
        if (fa != fb) return fa > fb;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    if (all.size() > count) all.resize(count);
    return all;
}

}  // namespace famf
