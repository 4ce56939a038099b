#pragma once

#include <Eigen/Dense>
#include <functional>

namespace shortrate::optim {

struct Options {
    int max_iterations = 400;
    /// Convergence: inf-norm of x - proj(x - grad) at the current point.
    double tolerance = 1e-6;
    int memory = 10;
    int max_line_search = 50;
    double armijo = 1e-4;
};

struct Result {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd gradient;
    double projected_gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// f(x, grad_out) -> value; may return +inf for points it cannot evaluate
/// (the line search backs off). grad_out is only used when the value is
/// finite.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Projected quasi-Newton descent on a box: limited-memory secant directions,
/// projection onto the bounds before every evaluation, Armijo backtracking.
/// Throws std::runtime_error if the objective is not finite at x0.
Result minimize_box(const Objective& fg, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const Options& options = {});

}  // namespace shortrate::optim
