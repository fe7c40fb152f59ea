#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hcm/core.hpp"

namespace hcm {

struct AgeBand {
    int min_years;
    int max_years;
};

// Marginal shares of the synthetic population. Every marginal is sampled
// independently.
struct PopulationSpec {
    std::size_t N = 250;
    std::uint64_t seed = 1;

    std::vector<AgeBand> age_bands;
    std::vector<double> age_shares;
    double male_share = 0.0;
    // Household of 1, 2, 3 and 4+ persons; 4+ is spread uniformly over 4..6.
    std::array<double, 4> household_shares{};
    double car_share = 0.0;
    // Shares of the seven income bands coded at kIncomeBandMidpoints.
    std::array<double, 7> income_shares{};
    // Full, part, unemployed, housekeeper, student.
    std::array<double, 5> employment_shares{};
    double high_education_share = 0.7;

    // Throws ValidationError when a marginal is negative or does not sum to 1
    // within 1e-9.
    void validate() const;
};

// Sample composition of the surveyed respondents.
PopulationSpec default_population(std::size_t N, std::uint64_t seed);

// Respondents "R00001".. with covariates only; each respondent has its own
// random stream keyed by id.
std::vector<RespondentRecord> synthesize_population(const PopulationSpec& spec);

// Block of the q-th respondent (1-based) under rotation.
inline int rotated_block(std::size_t q, int n_blocks) {
    return static_cast<int>((q - 1) % static_cast<std::size_t>(n_blocks)) + 1;
}

// Neutral distribution of statements outside the measured set.
inline constexpr std::array<double, 5> kNeutralLikert = {0.1, 0.2, 0.4, 0.2, 0.1};

// Supply-side defaults.
inline constexpr std::array<double, 4> kSupplyMeanByAge = {84.0, 85.43, 81.45, 78.96};
inline constexpr std::array<double, 4> kDemandMeanByAge = {78.0, 80.0, 87.9, 84.0};
inline constexpr double kRemunerationSd = 15.0;
// Mode shares in kAllModes order.
inline constexpr std::array<double, 6> kModeSharesCar = {0.61, 0.12, 0.07, 0.06, 0.06, 0.08};
inline constexpr std::array<double, 6> kModeSharesNoCar = {0.02, 0.43, 0.12, 0.07, 0.08, 0.28};
inline constexpr std::array<double, 6> kDetourMeanByMode = {30.6, 33.9, 19.3, 38.4, 30.0, 25.0};
inline constexpr std::array<double, 6> kDetourSdByMode = {3.0, 10.0, 6.0, 10.0, 10.0, 10.0};
// Distribution of the 1..4 importance score for cost, time, eco, flex.
inline constexpr std::array<std::array<double, 4>, kImportanceItems> kImportanceWeights = {{
    {0.04, 0.12, 0.36, 0.48},
    {0.04, 0.12, 0.38, 0.46},
    {0.18, 0.34, 0.32, 0.16},
    {0.05, 0.13, 0.36, 0.46},
}};

// Age band index 0..3 (18-24, 25-34, 35-44, 45+).
std::size_t age_band_index(int age_years);

// Runs the structural, measurement and choice equations forward for each
// respondent of the population. Respondent q (1-based, population order)
// gets block ((q-1) mod B) + 1 of the design.
Dataset simulate_dataset(const std::vector<RespondentRecord>& population,
                         const std::vector<ChoiceTask>& design, const ParameterSet& true_params,
                         std::uint64_t seed);

}  // namespace hcm
