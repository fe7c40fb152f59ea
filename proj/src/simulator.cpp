#include "hcm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>

#include "hcm/likelihood.hpp"
#include "hcm/random.hpp"

namespace hcm {

namespace {

void check_marginal(std::span<const double> shares, const char* name) {
    double total = 0.0;
    for (double s : shares) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ValidationError(std::string("population marginal ") + name + ": negative or non-finite share");
        total += s;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ValidationError(std::string("population marginal ") + name + ": shares sum to " +
                              std::to_string(total));
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ValidationError(std::string("population marginal ") + name + ": share outside [0, 1]");
}

std::string respondent_id(std::size_t q) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "R%05zu", q);
    return buf;
}

int clamp_round(double v, double lo, double hi) {
    return static_cast<int>(std::lround(std::clamp(v, lo, hi)));
}

}  // namespace

void PopulationSpec::validate() const {
    if (age_bands.empty() || age_bands.size() != age_shares.size())
        throw ValidationError("population marginal age: bands and shares differ in length");
    for (const auto& b : age_bands)
        if (b.min_years < 18 || b.max_years < b.min_years)
            throw ValidationError("population marginal age: malformed band");
    check_marginal(age_shares, "age");
    check_probability(male_share, "gender");
    check_marginal(household_shares, "household_size");
    check_probability(car_share, "car_in_household");
    check_marginal(income_shares, "income");
    check_marginal(employment_shares, "employment");
    check_probability(high_education_share, "education");
}

PopulationSpec default_population(std::size_t N, std::uint64_t seed) {
    PopulationSpec s;
    s.N = N;
    s.seed = seed;
    constexpr double n = 249.0;
    s.age_bands = {{18, 24}, {25, 34}, {35, 44}, {45, 64}};
    s.age_shares = {81 / n, 58 / n, 62 / n, 48 / n};
    s.male_share = 128 / n;
    s.household_shares = {55 / n, 50 / n, 78 / n, 66 / n};
    s.car_share = 166 / n;
    s.income_shares = {28 / n, 83 / n, 80 / n, 30 / n, 6 / n, 9 / n, 13 / n};
    s.employment_shares = {155 / n, 52 / n, 3 / n, 15 / n, 24 / n};
    s.high_education_share = 0.7;
    return s;
}

std::size_t age_band_index(int age) {
    if (age <= 24) return 0;
    if (age <= 34) return 1;
    if (age <= 44) return 2;
    return 3;
}

std::vector<RespondentRecord> synthesize_population(const PopulationSpec& spec) {
    spec.validate();
    std::vector<RespondentRecord> out;
    out.reserve(spec.N);
    for (std::size_t q = 1; q <= spec.N; ++q) {
        RespondentRecord r;
        r.id = respondent_id(q);
        RandomStream rng(spec.seed, std::string_view(r.id));

        const auto& band = spec.age_bands[rng.categorical(spec.age_shares)];
        r.age_years = band.min_years +
                      static_cast<int>(rng.below(static_cast<std::uint64_t>(band.max_years - band.min_years + 1)));
        r.gender = rng.uniform() < spec.male_share ? Gender::Male : Gender::Female;
        const std::size_t hh = rng.categorical(spec.household_shares);
        r.household_size = hh < 3 ? static_cast<int>(hh) + 1 : 4 + static_cast<int>(rng.below(3));
        if (r.household_size == 2) {
            r.n_children = rng.uniform() < 0.25 ? 1 : 0;
        } else if (r.household_size >= 3) {
            r.n_children = static_cast<int>(rng.below(static_cast<std::uint64_t>(r.household_size - 1)));
        }
        r.car_in_household = rng.uniform() < spec.car_share;
        r.income_uah_month = income_band_midpoint(static_cast<int>(rng.categorical(spec.income_shares)) + 1);
        r.employment = static_cast<Employment>(rng.categorical(spec.employment_shares));
        r.education_high = rng.uniform() < spec.high_education_share;
        r.likert.fill(3);
        out.push_back(std::move(r));
    }
    return out;
}

Dataset simulate_dataset(const std::vector<RespondentRecord>& population,
                         const std::vector<ChoiceTask>& design, const ParameterSet& p,
                         std::uint64_t seed) {
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (!std::isfinite(p[i])) throw ValidationError(std::string(param_name(i)) + ": not finite");
        if (is_positive_param(i) && !(p[i] > 0.0))
            throw ValidationError(std::string(param_name(i)) + ": must be positive");
    }
    Dataset ds;
    ds.design = design;
    for (const auto& t : design) validate_task(t);
    const int B = ds.n_blocks();
    if (B < 1) throw ValidationError("design has no blocks");
    std::map<int, std::vector<ChoiceTask>> blocks;
    for (int b = 1; b <= B; ++b) {
        blocks[b] = ds.block_tasks(b);
        if (blocks[b].size() != static_cast<std::size_t>(kTasksPerRespondent))
            throw ValidationError("block " + std::to_string(b) + " does not have " +
                                  std::to_string(kTasksPerRespondent) + " tasks");
    }

    const auto th = ThresholdVector::from_deltas(p[Param::Delta1], p[Param::Delta2]);
    ds.respondents.reserve(population.size());
    for (std::size_t q = 1; q <= population.size(); ++q) {
        RespondentRecord r = population[q - 1];
        r.block_id = rotated_block(q, B);
        RandomStream rng(splitmix64(seed) ^ 0x5eed5eed5eedULL, std::string_view(r.id));

        const double lv = structural_value(r, p, rng.normal());
        const double alpha = rng.normal();

        r.choices.clear();
        for (const auto& task : blocks[r.block_id]) {
            const Utilities u = task_utilities(task, r, lv, alpha, p);
            const std::array<double, 3> probs = {logit_choice_prob(u, Choice::CS),
                                                 logit_choice_prob(u, Choice::CC),
                                                 logit_choice_prob(u, Choice::Store)};
            r.choices.push_back(static_cast<Choice>(rng.categorical(probs)));
        }

        for (std::size_t w = 0; w < kStatements; ++w) r.likert[w] = 1 + static_cast<int>(rng.categorical(kNeutralLikert));
        for (std::size_t k = 0; k < kMeasured; ++k) {
            const auto probs = ordered_indicator_prob(lv, p[beta0_index(k)], p[loading_index(k)],
                                                      p[sigma_star_index(k)], th);
            r.likert[kMeasuredStatements[k]] = 1 + static_cast<int>(rng.categorical(probs));
        }
        const auto anchor = ordered_indicator_prob(lv, kAnchorIntercept, kAnchorLoading, kAnchorSigma, th);
        r.likert[kAnchorStatement] = 1 + static_cast<int>(rng.categorical(anchor));

        const std::size_t band = age_band_index(r.age_years);
        r.supply.remuneration_uah = clamp_round(kSupplyMeanByAge[band] + kRemunerationSd * rng.normal(), 50, 120);
        r.demand_remuneration_uah = clamp_round(kDemandMeanByAge[band] + kRemunerationSd * rng.normal(), 50, 120);
        const auto& shares = r.car_in_household ? kModeSharesCar : kModeSharesNoCar;
        const std::size_t mode = rng.categorical(shares);
        r.supply.cs_mode = kAllModes[mode];
        r.supply.detour_min = clamp_round(kDetourMeanByMode[mode] + kDetourSdByMode[mode] * rng.normal(), 15, 60);
        for (std::size_t i = 0; i < kImportanceItems; ++i)
            r.importance[i] = 1 + static_cast<int>(rng.categorical(kImportanceWeights[i]));

        ds.respondents.push_back(std::move(r));
    }
    return ds;
}

}  // namespace hcm
