#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcm/core.hpp"
#include "hcm/draws.hpp"

namespace hcm {

// Symmetric cut points -D1-D2, -D1, D1, D1+D2 of the 5-point scale.
struct ThresholdVector {
    std::array<double, 4> tau{};

    static ThresholdVector from_deltas(double delta1, double delta2);
};

// F2 pins the location and scale of the latent variable: its measurement
// equation has intercept 0, loading 1 and unit error scale.
inline constexpr double kAnchorIntercept = 0.0;
inline constexpr double kAnchorLoading = 1.0;
inline constexpr double kAnchorSigma = 1.0;

struct ModelOptions {
    // Include the Likert measurement equations; false gives the choice-only
    // kernel.
    bool measurement = true;
    // Include the normalized F2 indicator when measurement is on.
    bool anchor = true;

    std::size_t n_indicators() const { return measurement ? kMeasured + (anchor ? 1 : 0) : 0; }
};

double structural_value(std::span<const double, kStructuralCovariates> covariates,
                        const ParameterSet& params, double eps_draw);
double structural_value(const RespondentRecord& record, const ParameterSet& params, double eps_draw);

// Probabilities of scores 1..5 for latent response beta0 + beta * lv with
// error scale sigma_star.
std::array<double, 5> ordered_indicator_prob(double lv, double beta0, double beta, double sigma_star,
                                             const ThresholdVector& thresholds);

struct Utilities {
    double cs = 0.0;
    double cc = 0.0;
    double store = 0.0;

    double operator[](Choice c) const {
        return c == Choice::CS ? cs : c == Choice::CC ? cc : store;
    }
};

// alpha_draw is the standard-normal agent effect draw; it is scaled by
// SIGMA_ALPHA and enters the CS utility only.
Utilities task_utilities(const ChoiceTask& task, const RespondentRecord& record, double lv,
                         double alpha_draw, const ParameterSet& params);

double logit_choice_prob(const Utilities& u, Choice chosen);

// Direct-space simulated probability of one respondent's observed choices
// and indicators: the average over draws of the product of kernel and
// indicator probabilities. Underflows for long panels; see
// log_simulated_respondent_prob.
double simulated_respondent_prob(const RespondentRecord& record, const std::vector<ChoiceTask>& block,
                                 const ParameterSet& params, std::span<const double> draws,
                                 const ModelOptions& options = {});

// Log of the same quantity, accumulated with log-sum-exp over draws.
double log_simulated_respondent_prob(const RespondentRecord& record,
                                     const std::vector<ChoiceTask>& block, const ParameterSet& params,
                                     std::span<const double> draws, const ModelOptions& options = {});

// Dataset flattened into scaled features, sorted by respondent id.
struct PanelTask {
    double cs_cost, cs_time, co2_income, flex_income, cc_cost, cc_time;
    Choice chosen;
};

struct PanelRespondent {
    std::string id;
    std::array<double, kStructuralCovariates> covariates{};
    double n_children = 0.0;
    std::vector<PanelTask> tasks;
    // Observed scores of the measured statements, then the anchor.
    std::array<int, kMeasured + 1> scores{};
};

struct Panel {
    std::vector<PanelRespondent> respondents;

    static Panel build(const Dataset& dataset);
    std::vector<std::string> ids() const;
    std::size_t n_observations() const;
};

// Log simulated probability of one respondent; when gradient is non-empty
// (length kNumParams) it receives d/dtheta of that log probability.
double respondent_log_prob(const PanelRespondent& respondent, std::span<const double> draws,
                           const ParameterSet& params, const ModelOptions& options,
                           std::span<double> gradient = {});

struct LikelihoodValue {
    double log_likelihood = 0.0;
    std::vector<double> respondent_ll;
    Eigen::VectorXd gradient;  // empty unless requested
    Eigen::MatrixXd scores;    // N x kNumParams, empty unless requested
};

// Total simulated log-likelihood of a panel. Respondents are evaluated in
// parallel over `threads` workers and reduced by pairwise summation in id
// order, so the result does not depend on the worker count.
LikelihoodValue evaluate_likelihood(const Panel& panel, const DrawMatrix& draws,
                                    const ParameterSet& params, const ModelOptions& options,
                                    bool with_gradient, unsigned threads = 1);

double total_log_likelihood(const Dataset& dataset, const ParameterSet& params,
                            const DrawConfig& draws, const ModelOptions& options = {},
                            unsigned threads = 1);

// Equal-shares reference values: ln(1/3) per choice, and ln(1/5) per
// indicator response when measurement is on.
double null_log_likelihood(const Panel& panel, const ModelOptions& options);

double pairwise_sum(std::span<const double> values);

}  // namespace hcm
