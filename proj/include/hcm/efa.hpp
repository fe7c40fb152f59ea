#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcm/core.hpp"

namespace hcm {

class DegenerateInput : public Error {
public:
    using Error::Error;
};

// Unrotated or rotated solution over W statements and F retained factors.
struct FactorSolution {
    std::vector<double> eigenvalues;  // all W, descending
    std::size_t n_retained = 0;
    Eigen::MatrixXd loadings;         // W x F
    std::vector<double> communalities;
};

// names label the columns in error messages; may be empty.
Eigen::MatrixXd pearson_correlation(const Eigen::MatrixXd& scores,
                                    const std::vector<std::string>& names = {});

// Principal component extraction keeping eigenvalues >= threshold. Each
// loading column is oriented so that its column sum is non-negative.
FactorSolution extract_principal_factors(const Eigen::MatrixXd& corr,
                                         double kaiser_threshold = 1.0);

struct VarimaxResult {
    Eigen::MatrixXd loadings;
    Eigen::MatrixXd rotation;
    std::vector<double> criterion_trace;
    int iterations = 0;
    bool converged = true;
};

// Raw varimax criterion of a loading matrix (sum over factors of the
// variance of squared loadings).
double varimax_criterion(const Eigen::MatrixXd& loadings);

// Kaiser-normalized varimax. On non-convergence the last iterate is returned
// with converged = false.
VarimaxResult rotate_varimax(const Eigen::MatrixXd& loadings, double tol = 1e-8,
                             int max_iter = 1000);

// Rotated loadings with |value| < cutoff blanked.
struct LoadingTable {
    std::vector<std::string> statements;
    std::vector<std::vector<std::optional<double>>> cells;  // W rows x F columns

    std::size_t n_factors() const { return cells.empty() ? 0 : cells.front().size(); }
};

LoadingTable prune_loadings(const Eigen::MatrixXd& rotated, const std::vector<std::string>& statements,
                            double cutoff = 0.4);

// Statements with a kept loading on factor_id (1-based), in table order.
std::vector<std::string> indicators_for_factor(const LoadingTable& table, std::size_t factor_id,
                                               const std::set<std::string>& excluded = {});

// Tucker congruence between two loading vectors.
double tucker_congruence(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Best column permutation and signs of `estimate` against `truth` (same
// shape); returns per-factor congruence in truth column order.
std::vector<double> matched_congruence(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

struct EfaReport {
    FactorSolution unrotated;
    VarimaxResult rotated;
    LoadingTable pruned;
    std::vector<std::vector<std::string>> indicators;  // per factor
};

// Runs the whole chain on an N x 15 Likert matrix.
EfaReport run_efa(const Eigen::MatrixXd& scores, const std::vector<std::string>& statements,
                  double kaiser_threshold = 1.0, double cutoff = 0.4,
                  const std::set<std::string>& excluded = {});

std::string efa_json(const EfaReport& report);

}  // namespace hcm
