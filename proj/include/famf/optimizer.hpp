#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace famf {

// Objective callback: returns f(x) and, when grad is non-null, writes the
// gradient. Infeasible points return +infinity.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
    double gradient_tolerance = 1e-6;  // max-norm of the (projected) gradient
    int max_iterations = 2000;
    int max_halvings = 30;             // step halvings per line search
    // Optional per-coordinate lower bounds (projected steps). Empty = none.
    Eigen::VectorXd lower_bounds;
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

// Quasi-Newton minimisation with an inverse-Hessian BFGS update and an
// Armijo backtracking line search that halves the step on infeasible points.
BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& options = {});

// Symmetric central-difference Hessian from an analytic gradient.
Eigen::MatrixXd central_difference_hessian(const Objective& f, const Eigen::VectorXd& x,
                                           double relative_step = 1e-5);

// Central-difference gradient using function values only.
Eigen::VectorXd central_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                            double relative_step = 1e-6);

}  // namespace famf
