#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hcm {

// Objective for minimization; fills *gradient when non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* gradient)>;

struct BfgsOptions {
    double gradient_tol = 1e-3;  // max-norm
    int max_iter = 500;
    double max_step = 1.0;       // cap on any coordinate of the first trial step
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
    std::vector<double> f_trace;  // objective after each accepted step, starting at x0
    std::string message;
};

// BFGS with an Armijo backtracking line search. Non-finite trial values are
// rejected by the line search, so every accepted step lowers f.
BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace hcm
