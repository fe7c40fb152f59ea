#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcm/core.hpp"

namespace hcm {

inline constexpr int kHaltonSkip = 10;

// Radical inverse of index in the given base (index 1 -> 1/base).
double halton_value(std::uint64_t index, unsigned base);

// Per-respondent standard-normal draws, R rows x 2 columns stored row-major:
// column 0 drives the structural noise, column 1 the agent effect.
class DrawMatrix {
public:
    DrawMatrix() = default;
    DrawMatrix(std::size_t n_respondents, int R)
        : n_(n_respondents), R_(R), data_(n_respondents * static_cast<std::size_t>(R) * 2, 0.0) {}

    std::size_t n_respondents() const { return n_; }
    int R() const { return R_; }

    std::span<const double> respondent(std::size_t q) const {
        return {data_.data() + q * static_cast<std::size_t>(R_) * 2, static_cast<std::size_t>(R_) * 2};
    }
    double& at(std::size_t q, int r, int column) {
        return data_[(q * static_cast<std::size_t>(R_) + static_cast<std::size_t>(r)) * 2 +
                     static_cast<std::size_t>(column)];
    }
    double at(std::size_t q, int r, int column) const {
        return data_[(q * static_cast<std::size_t>(R_) + static_cast<std::size_t>(r)) * 2 +
                     static_cast<std::size_t>(column)];
    }

private:
    std::size_t n_ = 0;
    int R_ = 0;
    std::vector<double> data_;
};

// Draws for respondents 0..n-1 (Halton: consecutive segments of the bases
// 2/3 sequences after skipping the first 10 points; pseudo-random: one
// seeded stream per respondent index).
DrawMatrix generate_draws(const DrawConfig& config, std::size_t n_respondents);

// Draws keyed by respondent id: the Halton segment follows the id's rank in
// sorted order and the pseudo-random stream is seeded by the id, so the
// assignment does not depend on file order. Row q belongs to ids[q].
DrawMatrix generate_draws(const DrawConfig& config, const std::vector<std::string>& ids);

}  // namespace hcm
