#include "famf/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "famf/error.hpp"
#include "famf/random.hpp"

namespace famf {

namespace {

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd ca = a.array() - a.mean();
    Eigen::VectorXd cb = b.array() - b.mean();
    const double na = ca.norm(), nb = cb.norm();
    if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd out = Z;
    out.rowwise() -= Z.colwise().mean();
    return out;
}

}  // namespace

Eigen::VectorXd residual_signal(const Eigen::MatrixXd& r, const std::vector<std::string>& scales,
                                bool cross_scale_only) {
    const Eigen::Index k = r.rows();
    if (r.cols() != k) throw InputError("residual correlation matrix must be square");
    if (k < 2) throw InputError("residual signal needs at least two items");
    if (cross_scale_only && static_cast<Eigen::Index>(scales.size()) != k)
        throw InputError("scale labels do not match the residual matrix");
    Eigen::VectorXd m(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index l = 0; l < k; ++l) {
            if (l == i) continue;
            if (cross_scale_only && scales[static_cast<std::size_t>(l)] == scales[static_cast<std::size_t>(i)])
                continue;
            sum += std::abs(r(i, l));
            ++count;
        }
        if (count == 0) throw InputError("no cross-scale pairs for item " + std::to_string(i + 1));
        m(i) = sum / count;
    }
    return m;
}

RidgeFit ridge_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, double lambda) {
    if (!(lambda >= 0.0)) throw InputError("ridge penalty must be non-negative");
    if (Z.cols() < 1) throw DegenerateError("metadata uninformative: no features left");
    if (Z.rows() != m.size()) throw InputError("Z and m have different item counts");
    Eigen::MatrixXd A = Z.transpose() * Z;
    A.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 1.0);
    if (eig.eigenvalues().minCoeff() <= 1e-10 * top) {
        throw NumericError("ridge system Z'Z + lambda*I is singular at lambda = " + std::to_string(lambda) +
                           "; collinear features need lambda > 0");
    }
    RidgeFit fit;
    fit.gamma = A.ldlt().solve(Z.transpose() * m);
    fit.fitted = Z * fit.gamma;
    const double r = pearson(m, fit.fitted);
    fit.r = std::isnan(r) ? 0.0 : r;
    fit.r2 = fit.r * fit.r;
    const double sst = (m.array() - m.mean()).matrix().squaredNorm();
    fit.explained = sst > 0.0 ? 1.0 - (m - fit.fitted).array().matrix().squaredNorm() / sst : 0.0;
    return fit;
}

FinalWeights finalize_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& gamma, const Eigen::VectorXd& m,
                              std::optional<Eigen::Index> orient_feature) {
    const Eigen::Index k = Z.rows();
    if (k < 2) throw InputError("need at least two items to scale weights");
    if (!gamma.allFinite()) throw InputError("ridge coefficients are not finite");
    Eigen::VectorXd raw = Z * gamma;
    Eigen::VectorXd centred = raw.array() - raw.mean();
    const double scale_ref = Z.norm() * gamma.norm();
    const double norm = centred.norm();
    if (norm == 0.0 || norm <= 1e-12 * scale_ref) {
        throw DegenerateError("degenerate weights; metadata uninformative (raw weights are all equal) - "
                              "consider the CLF comparator");
    }
    FinalWeights out;
    out.w = centred * std::sqrt(static_cast<double>(k)) / norm;
    if (orient_feature) {
        if (*orient_feature < 0 || *orient_feature >= gamma.size()) throw InputError("orientation feature out of range");
        out.flipped = gamma(*orient_feature) < 0.0;
    } else {
        const double c = pearson(out.w, m);
        if (std::isnan(c)) {
            throw DegenerateError("correlation between weights and residual signal is undefined "
                                  "(residual signal has zero variance)");
        }
        out.flipped = c < 0.0;
    }
    if (out.flipped) out.w = -out.w;
    return out;
}

const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0, 5.0};
    return grid;
}

LambdaSelection choose_plateau(std::vector<SweepPoint> sweep, const PlateauRule& rule) {
    LambdaSelection sel;
    sel.sweep = std::move(sweep);
    std::vector<const SweepPoint*> feasible;
    for (const auto& pt : sel.sweep)
        if (pt.feasible) feasible.push_back(&pt);
    if (feasible.empty()) throw DegenerateError("degenerate weights at every lambda on the grid; metadata uninformative");
    if (!sel.sweep.front().feasible)
        sel.warnings.push_back("sweep starts at the first feasible lambda = " + std::to_string(feasible.front()->lambda));

    const double tol = rule.relative_r2_change * std::max(feasible.front()->r2, 0.01);
    for (std::size_t j = 1; j < feasible.size(); ++j) {
        const auto& prev = *feasible[j - 1];
        const auto& cur = *feasible[j];
        const double dr2 = std::abs(cur.r2 - prev.r2);
        const double dw = (cur.weights - prev.weights).lpNorm<Eigen::Infinity>();
        if (dr2 < tol && dw < rule.max_weight_change) {
            sel.lambda = cur.lambda;
            sel.plateau_found = true;
            return sel;
        }
    }
    sel.lambda = 1.0;
    sel.warnings.push_back("no plateau on the lambda grid; using lambda = 1");
    return sel;
}

LambdaSelection select_lambda(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, const std::vector<double>& grid,
                              const PlateauRule& rule, std::optional<Eigen::Index> orient_feature) {
    if (grid.size() < 2) throw InputError("lambda grid needs at least two values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0)) throw InputError("lambda grid values must be non-negative");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("lambda grid must be strictly ascending");
    }
    std::vector<SweepPoint> sweep;
    for (double lambda : grid) {
        SweepPoint pt;
        pt.lambda = lambda;
        try {
            RidgeFit fit = ridge_fit(Z, m, lambda);
            FinalWeights fw = finalize_weights(Z, fit.gamma, m, orient_feature);
            pt.feasible = true;
            pt.r2 = fit.r2;
            pt.r = fit.r;
            pt.explained = fit.explained;
            pt.gamma = fw.flipped ? Eigen::VectorXd(-fit.gamma) : fit.gamma;
            pt.weights = fw.w;
            pt.max_weight = fw.w.cwiseAbs().maxCoeff();
        } catch (const NumericError& e) {
            pt.note = "infeasible: singular system";
        } catch (const DegenerateError& e) {
            pt.note = "infeasible: degenerate weights";
        }
        sweep.push_back(std::move(pt));
    }
    return choose_plateau(std::move(sweep), rule);
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapGamma bootstrap_gamma(const Eigen::MatrixXd& Z, const Eigen::VectorXd& m, double lambda, int replicates,
                               std::uint64_t seed) {
    if (replicates < 100) throw InputError("bootstrap needs at least 100 replicates");
    const Eigen::Index k = Z.rows(), p = Z.cols();
    BootstrapGamma out;
    out.replicates = replicates;
    if (k < p + 2)
        out.warnings.push_back("few items relative to features (k < p + 2); bootstrap intervals are unstable");

    std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(replicates));
    std::vector<int> redraws(static_cast<std::size_t>(replicates), 0);
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(replicates));
    parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t b) {
        try {
            auto engine = make_stream(seed, {static_cast<std::uint64_t>(b)});
            for (int attempt = 0;; ++attempt) {
                Eigen::MatrixXd Zb(k, p);
                Eigen::VectorXd mb(k);
                for (Eigen::Index i = 0; i < k; ++i) {
                    auto src = static_cast<Eigen::Index>(uniform_index(engine, static_cast<std::size_t>(k)));
                    Zb.row(i) = Z.row(src);
                    mb(i) = m(src);
                }
                try {
                    draws[b] = ridge_fit(center_columns(Zb), mb, lambda).gamma;
                    return;
                } catch (const NumericError&) {
                    if (attempt >= 10) throw;
                    ++redraws[b];
                }
            }
        } catch (...) {
            failures[b] = std::current_exception();
        }
    });
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
    for (int r : redraws) out.redraws += r;

    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<double> col;
        col.reserve(draws.size());
        for (const auto& g : draws) col.push_back(g(j));
        out.intervals.push_back({quantile(col, 0.025), quantile(col, 0.975)});
    }
    return out;
}

CalibrationResult calibrate(const Eigen::MatrixXd& residual_correlations, const std::vector<std::string>& scales,
                            const FeatureMatrix& features, const CalibrationOptions& options) {
    CalibrationResult res;
    res.feature_names = features.feature_names;
    res.cross_scale_only = options.cross_scale_only;
    res.warnings = features.warnings;
    res.m = residual_signal(residual_correlations, scales, options.cross_scale_only);

    std::optional<Eigen::Index> orient;
    if (options.orient_feature) {
        orient = features.index_of(*options.orient_feature);
        if (!orient) throw InputError("orientation feature '" + *options.orient_feature + "' is not in Z");
    }

    LambdaSelection sel = select_lambda(features.Z, res.m, options.grid, options.rule, orient);
    res.sweep = sel.sweep;
    res.plateau_found = sel.plateau_found;
    res.lambda = options.lambda ? *options.lambda : sel.lambda;
    if (!options.lambda) res.warnings.insert(res.warnings.end(), sel.warnings.begin(), sel.warnings.end());

    RidgeFit fit = ridge_fit(features.Z, res.m, res.lambda);
    FinalWeights fw = finalize_weights(features.Z, fit.gamma, res.m, orient);
    res.gamma = fw.flipped ? Eigen::VectorXd(-fit.gamma) : fit.gamma;
    res.fitted = fit.fitted;
    res.r = fit.r;
    res.r2 = fit.r2;
    res.explained = fit.explained;
    res.w = fw.w;
    res.flipped = fw.flipped;

    if (options.bootstrap > 0) {
        BootstrapGamma boot = bootstrap_gamma(features.Z, res.m, res.lambda, options.bootstrap, options.seed);
        if (fw.flipped) {
            for (auto& iv : boot.intervals) iv = {-iv.hi, -iv.lo};
        }
        res.gamma_ci = boot.intervals;
        res.warnings.insert(res.warnings.end(), boot.warnings.begin(), boot.warnings.end());
    }
    return res;
}

}  // namespace famf
