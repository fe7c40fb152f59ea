#include "hcm/bfgs.hpp"

#include <algorithm>
#include <cmath>

namespace hcm {

BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.gradient.resize(n);
    res.f = objective(res.x, &res.gradient);
    res.f_trace.push_back(res.f);
    if (!std::isfinite(res.f) || !res.gradient.allFinite()) {
        res.message = "objective not finite at the starting point";
        return res;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian approximation
    bool scaled = false;
    Eigen::VectorXd g_new(n);

    for (int it = 0; it < options.max_iter; ++it) {
        if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tol) {
            res.converged = true;
            res.message = "gradient below tolerance";
            return res;
        }
        Eigen::VectorXd dir = -H * res.gradient;
        double slope = res.gradient.dot(dir);
        if (!(slope < 0.0)) {
            H.setIdentity();
            scaled = false;
            dir = -res.gradient;
            slope = -res.gradient.squaredNorm();
        }
        double step = 1.0;
        const double biggest = dir.lpNorm<Eigen::Infinity>();
        if (!scaled && biggest > options.max_step) step = options.max_step / biggest;

        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * dir;
            f_new = objective(x_new, &g_new);
            if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            double next = 0.5 * step;
            if (std::isfinite(f_new)) {
                // Minimizer of the quadratic through f(0), f'(0) and f(step).
                const double q = -slope * step * step / (2.0 * (f_new - res.f - slope * step));
                if (std::isfinite(q)) next = std::clamp(q, 0.1 * step, 0.5 * step);
            }
            step = next;
        }
        if (!accepted) {
            if (!H.isIdentity()) {
                H.setIdentity();
                scaled = false;
                continue;
            }
            res.message = "line search failed to decrease the objective";
            return res;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) -
                 rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        res.x = std::move(x_new);
        res.f = f_new;
        res.gradient = g_new;
        res.f_trace.push_back(f_new);
        res.iterations = it + 1;
    }
    res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tol;
    res.message = res.converged ? "gradient below tolerance" : "iteration limit reached";
    return res;
}

}  // namespace hcm
