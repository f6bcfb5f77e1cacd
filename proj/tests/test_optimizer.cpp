#include <doctest.h>

#include <cmath>
#include <limits>

#include "famf/optimizer.hpp"

using namespace famf;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    if (g) {
        g->resize(2);
        (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
        (*g)(1) = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("BFGS solves a positive definite quadratic") {
    Eigen::MatrixXd A(3, 3);
    A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    Eigen::VectorXd b(3);
    b << 1, -2, 0.5;
    Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) *g = A * x - b;
        return 0.5 * x.dot(A * x) - b.dot(x);
    };
    BfgsResult r = minimize_bfgs(f, Eigen::VectorXd::Zero(3));
    REQUIRE(r.converged);
    Eigen::VectorXd expected = A.ldlt().solve(b);
    CHECK((r.x - expected).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.gradient_norm < 1e-6);
}

TEST_CASE("BFGS reaches the Rosenbrock minimum") {
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    BfgsResult r = minimize_bfgs(rosenbrock, x0);
    REQUIRE(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("line search halves through an infeasible region") {
    // f is +inf for x < 0.5; minimum of the feasible part at the boundary side.
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (x(0) < 0.5) return std::numeric_limits<double>::infinity();
        if (g) *g = Eigen::VectorXd::Constant(1, 2.0 * (x(0) - 1.0));
        return (x(0) - 1.0) * (x(0) - 1.0);
    };
    BfgsResult r = minimize_bfgs(f, Eigen::VectorXd::Constant(1, 5.0));
    CHECK(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lower bounds are respected") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) *g = Eigen::VectorXd::Constant(1, 2.0 * (x(0) + 1.0));
        return (x(0) + 1.0) * (x(0) + 1.0);
    };
    BfgsOptions opt;
    opt.lower_bounds = Eigen::VectorXd::Constant(1, 0.25);
    BfgsResult r = minimize_bfgs(f, Eigen::VectorXd::Constant(1, 2.0), opt);
    CHECK(r.x(0) == doctest::Approx(0.25));
    CHECK(r.converged);
}

TEST_CASE("iteration cap reports non-convergence") {
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    BfgsOptions opt;
    opt.max_iterations = 3;
    BfgsResult r = minimize_bfgs(rosenbrock, x0, opt);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
    CHECK_FALSE(r.message.empty());
}

TEST_CASE("finite-difference derivatives") {
    Eigen::VectorXd x(2);
    x << 0.3, -0.7;
    Eigen::VectorXd g;
    rosenbrock(x, &g);
    CHECK((central_difference_gradient(rosenbrock, x) - g).cwiseAbs().maxCoeff() < 1e-5);

    Eigen::MatrixXd H = central_difference_hessian(rosenbrock, x);
    Eigen::MatrixXd exact(2, 2);
    exact << 2.0 - 400.0 * (x(1) - 3.0 * x(0) * x(0)), -400.0 * x(0), -400.0 * x(0), 200.0;
    CHECK((H - exact).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(H(0, 1) == H(1, 0));
}
