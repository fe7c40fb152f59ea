#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcm/core.hpp"
#include "hcm/draws.hpp"
#include "hcm/likelihood.hpp"

namespace hcm {

class EstimationError : public Error {
public:
    using Error::Error;
};

class SingularHessian : public Error {
public:
    SingularHessian(const std::string& message, std::vector<std::vector<std::size_t>> directions)
        : Error(message), directions_(std::move(directions)) {}

    // Parameter indices carrying weight in each near-null eigen-direction.
    const std::vector<std::vector<std::size_t>>& directions() const { return directions_; }

private:
    std::vector<std::vector<std::size_t>> directions_;
};

struct EstimationConfig {
    DrawConfig draws;
    double tol = 1e-3;  // max-norm of the gradient in the optimizer's coordinates
    int max_iter = 500;
    ModelOptions model;
    unsigned threads = 1;
    // Parameters held at their starting values, on top of those the model
    // options switch off.
    std::vector<std::size_t> fixed;
    bool compute_covariance = true;
};

// Parameters the optimizer moves: the choice-only model drops the measurement
// and structural blocks and the latent-variable coefficient.
std::vector<std::size_t> free_parameters(const EstimationConfig& config);

// Optimizer coordinates: log for the positive scales and deltas, identity
// otherwise.
Eigen::VectorXd to_working(const ParameterSet& params, const std::vector<std::size_t>& free);
ParameterSet from_working(const Eigen::VectorXd& working, const std::vector<std::size_t>& free,
                          ParameterSet base);

struct EstimationResult {
    ParameterSet estimates;
    std::array<double, kNumParams> robust_se{};  // NaN for fixed parameters
    std::array<double, kNumParams> robust_t{};
    std::vector<std::size_t> free;
    double ll_null = 0.0;             // equal shares, choices and indicators
    double ll_null_choice_only = 0.0; // equal shares over the choices
    double ll_init = 0.0;
    double ll_final = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> ll_trace;
    DrawConfig draws;
    ModelOptions model;
    std::vector<std::string> warnings;
};

EstimationResult maximize_likelihood(const Dataset& dataset, const ParameterSet& init,
                                     const EstimationConfig& config);

struct RobustCovariance {
    std::vector<std::size_t> free;
    Eigen::MatrixXd hessian;     // of the log-likelihood, free x free
    Eigen::MatrixXd covariance;  // H^-1 B H^-1
    std::array<double, kNumParams> se{};
    std::array<double, kNumParams> t{};
};

// Central-difference Hessian from an analytic gradient, symmetrized. step_j =
// rel_step * (1 + |x_j|).
Eigen::MatrixXd numerical_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                                  const Eigen::VectorXd& x, double rel_step = 1e-5);

// H^-1 (S'S) H^-1 with S the per-unit score rows. Throws SingularHessian
// when H has near-zero eigenvalues; names index into the columns.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& scores,
                         const std::vector<std::size_t>& column_ids = {});

RobustCovariance robust_covariance(const Panel& panel, const DrawMatrix& draws, const ParameterSet& estimates,
                                   const std::vector<std::size_t>& free, const ModelOptions& model,
                                   unsigned threads = 1);
RobustCovariance robust_covariance(const Dataset& dataset, const ParameterSet& estimates,
                                   const EstimationConfig& config);

// Central-difference gradient of the total log-likelihood in natural
// parameters, step rel_step * (1 + |theta|).
Eigen::VectorXd finite_difference_gradient(const Panel& panel, const DrawMatrix& draws,
                                           const ParameterSet& params, const ModelOptions& model,
                                           double rel_step = 1e-5, unsigned threads = 1);

// (beta_time / beta_cost) * 10 in UAH per hour.
double compute_wtp(const ParameterSet& estimates, Channel channel);

std::string estimates_json(const EstimationResult& result);
std::string wtp_json(const ParameterSet& estimates);

}  // namespace hcm
