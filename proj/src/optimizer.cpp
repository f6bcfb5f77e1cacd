#include "famf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace famf {

namespace {

void project(Eigen::VectorXd& x, const Eigen::VectorXd& lower) {
    if (lower.size() == 0) return;
    x = x.cwiseMax(lower);
}

// Gradient with components that point out of an active bound zeroed.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& lower) {
    if (lower.size() == 0) return g;
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x(i) <= lower(i) && g(i) > 0.0) pg(i) = 0.0;
    }
    return pg;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& options) {
    const Eigen::Index n = x0.size();
    const auto& lower = options.lower_bounds;
    BfgsResult res;
    res.x = x0;
    project(res.x, lower);
    res.gradient = Eigen::VectorXd::Zero(n);
    res.value = f(res.x, &res.gradient);
    if (!std::isfinite(res.value)) {
        res.message = "objective is not finite at the start values";
        return res;
    }
    if (n == 0) {
        res.converged = true;
        res.message = "no free parameters";
        return res;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    Eigen::VectorXd g_new(n);
    for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
        Eigen::VectorXd pg = projected_gradient(res.x, res.gradient, lower);
        res.gradient_norm = pg.lpNorm<Eigen::Infinity>();
        if (res.gradient_norm < options.gradient_tolerance) {
            res.converged = true;
            res.message = "gradient tolerance reached";
            return res;
        }

        bool steepest = !scaled;
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        bool saw_finite = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            Eigen::VectorXd d = steepest ? Eigen::VectorXd(-pg) : Eigen::VectorXd(-H * pg);
            if (pg.dot(d) >= 0.0) {
                d = -pg;
                steepest = true;
            }
            double t = 1.0;
            if (steepest && !scaled) t = std::min(1.0, 0.1 / d.lpNorm<Eigen::Infinity>());
            for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
                x_new = res.x + t * d;
                project(x_new, lower);
                f_new = f(x_new, &g_new);
                if (!std::isfinite(f_new)) continue;
                saw_finite = true;
                if (f_new <= res.value + 1e-4 * res.gradient.dot(x_new - res.x)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (steepest) break;
                // Curvature model is bad: restart from steepest descent.
                H.setIdentity();
                scaled = false;
                steepest = true;
            }
        }
        if (!accepted) {
            res.message = saw_finite ? "line search failed to decrease the objective"
                                     : "objective infeasible along the search direction after step halving";
            return res;
        }

        Eigen::VectorXd s = x_new - res.x;
        Eigen::VectorXd y = g_new - res.gradient;
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            Eigen::VectorXd Hy = H * y;
            const double yHy = y.dot(Hy);
            H.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
            H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
        }
        res.x = std::move(x_new);
        res.value = f_new;
        res.gradient = g_new;
    }
    res.gradient_norm = projected_gradient(res.x, res.gradient, lower).lpNorm<Eigen::Infinity>();
    res.converged = res.gradient_norm < options.gradient_tolerance;
    res.message = res.converged ? "gradient tolerance reached" : "iteration limit reached";
    return res;
}

Eigen::MatrixXd central_difference_hessian(const Objective& f, const Eigen::VectorXd& x,
                                           double relative_step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd gp(n), gm(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double h = relative_step * std::max(1.0, std::abs(x(i)));
        bool ok = false;
        for (int tries = 0; tries < 8 && !ok; ++tries, h *= 0.5) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            double fp = f(xp, &gp);
            double fm = f(xm, &gm);
            ok = std::isfinite(fp) && std::isfinite(fm);
            if (ok) H.col(i) = (gp - gm) / (2.0 * h);
        }
        if (!ok) H.col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return 0.5 * (H + H.transpose());
}

Eigen::VectorXd central_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                            double relative_step) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double h = relative_step * std::max(1.0, std::abs(x(i)));
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp, nullptr) - f(xm, nullptr)) / (2.0 * h);
    }
    return g;
}

}  // namespace famf
