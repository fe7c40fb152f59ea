#include "hcm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "hcm/bfgs.hpp"
#include "json.hpp"

namespace hcm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::vector<std::size_t> free_parameters(const EstimationConfig& config) {
    std::set<std::size_t> fixed(config.fixed.begin(), config.fixed.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (fixed.count(i)) continue;
        if (!config.model.measurement && !is_choice_param(i)) continue;
        if (!config.model.measurement && i == idx(Param::BetaLv)) continue;
        out.push_back(i);
    }
    return out;
}

Eigen::VectorXd to_working(const ParameterSet& params, const std::vector<std::size_t>& free) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(free.size()));
    for (std::size_t j = 0; j < free.size(); ++j) {
        const double v = params[free[j]];
        w[static_cast<Eigen::Index>(j)] = is_positive_param(free[j]) ? std::log(v) : v;
    }
    return w;
}

ParameterSet from_working(const Eigen::VectorXd& w, const std::vector<std::size_t>& free, ParameterSet base) {
    for (std::size_t j = 0; j < free.size(); ++j) {
        const double v = w[static_cast<Eigen::Index>(j)];
        base[free[j]] = is_positive_param(free[j]) ? std::exp(v) : v;
    }
    return base;
}

Eigen::MatrixXd numerical_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                                  const Eigen::VectorXd& x, double rel_step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = rel_step * (1.0 + std::abs(x[j]));
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        H.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& scores,
                         const std::vector<std::size_t>& column_ids) {
    const Eigen::Index n = hessian.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    std::vector<std::vector<std::size_t>> null_dirs;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(ev[k]) > 1e-9 * scale && scale > 0.0) continue;
        const Eigen::VectorXd v = eig.eigenvectors().col(k);
        std::vector<std::size_t> involved;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(v[i]) > 0.1) {
                involved.push_back(static_cast<std::size_t>(i) < column_ids.size()
                                       ? column_ids[static_cast<std::size_t>(i)]
                                       : static_cast<std::size_t>(i));
            }
        }
        null_dirs.push_back(std::move(involved));
    }
    if (!null_dirs.empty()) {
        std::ostringstream os;
        os << "singular Hessian; near-zero eigen-directions:";
        for (const auto& d : null_dirs) {
            os << " {";
            for (std::size_t i = 0; i < d.size(); ++i)
                os << (i ? ", " : "") << (column_ids.empty() ? std::to_string(d[i]) : std::string(param_name(d[i])));
            os << "}";
        }
        throw SingularHessian(os.str(), std::move(null_dirs));
    }
    const Eigen::MatrixXd Hinv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                                 eig.eigenvectors().transpose();
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    const Eigen::MatrixXd cov = Hinv * meat * Hinv;
    return 0.5 * (cov + cov.transpose());
}

RobustCovariance robust_covariance(const Panel& panel, const DrawMatrix& draws, const ParameterSet& estimates,
                                   const std::vector<std::size_t>& free, const ModelOptions& model,
                                   unsigned threads) {
    const auto nf = static_cast<Eigen::Index>(free.size());
    auto restrict = [&](const Eigen::VectorXd& full) {
        Eigen::VectorXd out(nf);
        for (Eigen::Index j = 0; j < nf; ++j) out[j] = full[static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)])];
        return out;
    };
    Eigen::VectorXd x(nf);
    for (Eigen::Index j = 0; j < nf; ++j) x[j] = estimates[free[static_cast<std::size_t>(j)]];
    auto gradient = [&](const Eigen::VectorXd& at) {
        ParameterSet p = estimates;
        for (Eigen::Index j = 0; j < nf; ++j) p[free[static_cast<std::size_t>(j)]] = at[j];
        return restrict(evaluate_likelihood(panel, draws, p, model, true, threads).gradient);
    };

    RobustCovariance rc;
    rc.free = free;
    rc.hessian = numerical_hessian(gradient, x);

    const auto at_estimate = evaluate_likelihood(panel, draws, estimates, model, true, threads);
    Eigen::MatrixXd scores(at_estimate.scores.rows(), nf);
    for (Eigen::Index j = 0; j < nf; ++j)
        scores.col(j) = at_estimate.scores.col(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)]));

    rc.covariance = sandwich(rc.hessian, scores, free);
    rc.se.fill(kNaN);
    rc.t.fill(kNaN);
    for (Eigen::Index j = 0; j < nf; ++j) {
        const std::size_t i = free[static_cast<std::size_t>(j)];
        rc.se[i] = std::sqrt(std::max(0.0, rc.covariance(j, j)));
        rc.t[i] = rc.se[i] > 0.0 ? estimates[i] / rc.se[i] : kNaN;
    }
    return rc;
}

RobustCovariance robust_covariance(const Dataset& dataset, const ParameterSet& estimates,
                                   const EstimationConfig& config) {
    const Panel panel = Panel::build(dataset);
    const DrawMatrix draws = generate_draws(config.draws, panel.ids());
    return robust_covariance(panel, draws, estimates, free_parameters(config), config.model, config.threads);
}

Eigen::VectorXd finite_difference_gradient(const Panel& panel, const DrawMatrix& draws,
                                           const ParameterSet& params, const ModelOptions& model,
                                           double rel_step, unsigned threads) {
    Eigen::VectorXd g(kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const double h = rel_step * (1.0 + std::abs(params[i]));
        ParameterSet up = params, down = params;
        up[i] += h;
        down[i] -= h;
        const double fu = evaluate_likelihood(panel, draws, up, model, false, threads).log_likelihood;
        const double fd = evaluate_likelihood(panel, draws, down, model, false, threads).log_likelihood;
        g[static_cast<Eigen::Index>(i)] = (fu - fd) / (2.0 * h);
    }
    return g;
}

EstimationResult maximize_likelihood(const Dataset& dataset, const ParameterSet& init,
                                     const EstimationConfig& config) {
    dataset.validate();
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (!std::isfinite(init[i]))
            throw EstimationError("starting value of " + std::string(param_name(i)) + " is not finite");
        if (is_positive_param(i) && !(init[i] > 0.0))
            throw EstimationError("starting value of " + std::string(param_name(i)) + " must be positive");
    }

    const Panel panel = Panel::build(dataset);
    const DrawMatrix draws = generate_draws(config.draws, panel.ids());
    const auto free = free_parameters(config);

    EstimationResult res;
    res.free = free;
    res.draws = config.draws;
    res.model = config.model;
    res.ll_null = null_log_likelihood(panel, config.model);
    res.ll_null_choice_only = null_log_likelihood(panel, ModelOptions{false, false});

    res.ll_init = evaluate_likelihood(panel, draws, init, config.model, false, config.threads).log_likelihood;
    if (!std::isfinite(res.ll_init))
        throw EstimationError("simulated log-likelihood is not finite at the starting values");

    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
        const ParameterSet p = from_working(w, free, init);
        const auto v = evaluate_likelihood(panel, draws, p, config.model, grad != nullptr, config.threads);
        if (grad) {
            grad->resize(w.size());
            for (std::size_t j = 0; j < free.size(); ++j) {
                const std::size_t i = free[j];
                const double chain = is_positive_param(i) ? p[i] : 1.0;
                (*grad)[static_cast<Eigen::Index>(j)] = -v.gradient[static_cast<Eigen::Index>(i)] * chain;
            }
        }
        return -v.log_likelihood;
    };

    BfgsOptions opts;
    opts.gradient_tol = config.tol;
    opts.max_iter = config.max_iter;
    const BfgsResult fit = minimize_bfgs(objective, to_working(init, free), opts);

    res.estimates = from_working(fit.x, free, init);
    res.ll_final = -fit.f;
    res.converged = fit.converged;
    res.iterations = fit.iterations;
    for (double f : fit.f_trace) res.ll_trace.push_back(-f);
    if (!fit.converged) res.warnings.push_back("optimizer: " + fit.message);

    res.robust_se.fill(kNaN);
    res.robust_t.fill(kNaN);
    if (config.compute_covariance) {
        std::vector<std::size_t> usable = free;
        for (int attempt = 0; attempt < 3 && !usable.empty(); ++attempt) {
            try {
                const auto rc = robust_covariance(panel, draws, res.estimates, usable, config.model, config.threads);
                for (auto i : usable) {
                    res.robust_se[i] = rc.se[i];
                    res.robust_t[i] = rc.t[i];
                }
                break;
            } catch (const SingularHessian& e) {
                res.warnings.push_back(std::string("non-identified: ") + e.what());
                std::set<std::size_t> bad;
                for (const auto& d : e.directions()) bad.insert(d.begin(), d.end());
                for (auto i : bad) {
                    res.robust_se[i] = kInf;
                    res.robust_t[i] = 0.0;
                }
                std::erase_if(usable, [&](std::size_t i) { return bad.count(i) > 0; });
            }
        }
    }
    return res;
}

double compute_wtp(const ParameterSet& p, Channel channel) {
    const double time = channel == Channel::CS ? p[Param::BetaTimeCs] : p[Param::BetaTimeCc];
    const double cost = channel == Channel::CS ? p[Param::BetaCostCs] : p[Param::BetaCostCc];
    if (cost == 0.0) throw EstimationError("cost coefficient is zero; willingness to pay undefined");
    return time / cost * (kCostScale / kTimeScale);
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

std::string estimates_json(const EstimationResult& r) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    ojson params = ojson::array();
    std::set<std::size_t> free(r.free.begin(), r.free.end());
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const char* group = is_choice_param(i) ? "choice_model"
                            : is_measurement_param(i) ? "measurement_equations"
                                                      : "structural_equation";
        params.push_back({{"name", std::string(param_name(i))},
                          {"group", group},
                          {"value", r.estimates[i]},
                          {"robust_se", number_or_null(r.robust_se[i])},
                          {"robust_t", number_or_null(r.robust_t[i])},
                          {"fixed", free.count(i) == 0}});
    }
    j["parameters"] = params;
    j["number_of_draws"] = r.draws.R;
    j["draw_scheme"] = std::string(to_string(r.draws.scheme));
    j["draw_seed"] = r.draws.seed;
    j["measurement"] = r.model.measurement;
    j["ll_null"] = r.ll_null;
    j["ll_null_choice_only"] = r.ll_null_choice_only;
    j["ll_init"] = r.ll_init;
    j["ll_final"] = r.ll_final;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

std::string wtp_json(const ParameterSet& p) {
    nlohmann::ordered_json j;
    j["CS"] = compute_wtp(p, Channel::CS);
    j["CC"] = compute_wtp(p, Channel::CC);
    j["unit"] = "UAH/hour";
    return j.dump(2) + "\n";
}

}  // namespace hcm
