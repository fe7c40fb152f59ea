#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hcm/core.hpp"

namespace hcm {

class InfeasibleDesign : public Error {
public:
    using Error::Error;
};

// Candidate or selected profiles: one row of level codes per profile, in
// attribute order, with the effects-coded main-effects model matrix.
struct DesignTable {
    std::vector<AttributeSpec> attributes;
    std::vector<std::vector<double>> rows;
    Eigen::MatrixXd model_matrix;

    std::size_t size() const { return rows.size(); }
    Eigen::Index n_columns() const { return model_matrix.cols(); }
};

// Intercept plus (levels - 1) effects-coded columns per attribute.
Eigen::MatrixXd effects_model_matrix(const std::vector<AttributeSpec>& attributes,
                                     const std::vector<std::vector<double>>& rows);

// log det(X'X / n); -inf when singular.
double normalized_log_det(const Eigen::MatrixXd& model_matrix);

// Full factorial in lexicographic order (first attribute varies slowest).
DesignTable enumerate_full_factorial(const std::vector<AttributeSpec>& attributes);

struct DOptimalOptions {
    std::uint64_t seed = 1;
    int max_iter = 1000;
    int restarts = 10;
};

struct DOptimalResult {
    DesignTable fraction;
    std::vector<std::size_t> candidate_rows;  // indices into the full table, ascending
    double log_det = 0.0;
    std::vector<double> log_det_trace;  // per exchange of the winning restart
    int iterations = 0;
    bool converged = true;
};

// Fedorov exchange from seeded random starts; keeps the best restart.
DOptimalResult select_d_optimal(const DesignTable& full, std::size_t k,
                                const DOptimalOptions& options = {});

struct BlockSet {
    // Row indices into the fraction, one list per block.
    std::vector<std::vector<std::size_t>> blocks;
};

BlockSet partition_blocks(const DesignTable& fraction, std::size_t n_blocks, std::uint64_t seed);

// Largest |count in block - count in fraction / B| over blocks, attributes
// and levels.
double max_level_deviation(const DesignTable& fraction, const BlockSet& blocks);

// Maps a blocked fraction onto choice tasks. Needs the six default attribute
// names.
std::vector<ChoiceTask> to_choice_tasks(const DesignTable& fraction, const BlockSet& blocks);

// ceil(500 c / (t a)).
long orme_minimum_sample(long max_levels, long tasks, long alternatives);

}  // namespace hcm
