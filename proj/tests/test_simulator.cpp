#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "hcm/draws.hpp"
#include "hcm/likelihood.hpp"
#include "hcm/simulator.hpp"
#include "test_util.hpp"

using namespace hcm;

namespace {

// Zero utilities apart from what the test sets; positive scales are set to
// a negligible value where they would add noise to the kernel.
ParameterSet flat_params() {
    ParameterSet p;
    for (std::size_t i = 0; i < kNumParams; ++i)
        if (is_positive_param(i)) p[i] = 1.0;
    p[Param::SigmaAlpha] = 1e-12;
    return p;
}

std::vector<RespondentRecord> clones(std::size_t n, const RespondentRecord& proto) {
    std::vector<RespondentRecord> out;
    char buf[16];
    for (std::size_t i = 1; i <= n; ++i) {
        auto r = proto;
        std::snprintf(buf, sizeof buf, "R%05zu", i);
        r.id = buf;
        out.push_back(r);
    }
    return out;
}

double share(std::size_t hits, std::size_t n) { return static_cast<double>(hits) / static_cast<double>(n); }

}  // namespace

TEST_CASE("population spec validation") {
    auto spec = default_population(10, 1);
    CHECK_NOTHROW(spec.validate());
    spec.income_shares[0] += 0.01;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = default_population(10, 1);
    spec.car_share = 1.2;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = default_population(10, 1);
    spec.age_shares.pop_back();
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("synthetic population marginals") {
    CHECK(synthesize_population(default_population(0, 1)).empty());

    const auto spec = default_population(10000, 77);
    const auto pop = synthesize_population(spec);
    REQUIRE(pop.size() == 10000);
    CHECK(pop.front().id == "R00001");
    CHECK(pop.back().id == "R10000");
    const double tol = 0.015;

    std::size_t male = 0, car = 0;
    std::array<std::size_t, 4> age{}, hh{};
    std::array<std::size_t, 7> income{};
    std::array<std::size_t, 5> emp{};
    for (const auto& r : pop) {
        male += r.gender == Gender::Male;
        car += r.car_in_household;
        ++age[age_band_index(r.age_years)];
        ++hh[static_cast<std::size_t>(std::min(r.household_size, 4) - 1)];
        for (std::size_t b = 0; b < 7; ++b)
            if (r.income_uah_month == kIncomeBandMidpoints[b]) ++income[b];
        ++emp[static_cast<std::size_t>(r.employment)];
        CHECK(check_respondent([&] {
                  auto full = r;
                  full.likert.fill(3);
                  full.choices.assign(kTasksPerRespondent, Choice::CS);
                  return full;
              }())
                  .empty());
        CHECK(r.n_children < r.household_size);
    }
    CHECK(std::abs(share(male, 10000) - 128.0 / 249.0) <= tol);
    CHECK(128.0 / 249.0 == doctest::Approx(0.5141).epsilon(1e-3));
    CHECK(std::abs(share(car, 10000) - 166.0 / 249.0) <= tol);
    const double age_counts[] = {81, 58, 62, 48};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(share(age[i], 10000) - age_counts[i] / 249.0) <= tol);
    const double hh_counts[] = {55, 50, 78, 66};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(share(hh[i], 10000) - hh_counts[i] / 249.0) <= tol);
    const double inc_counts[] = {28, 83, 80, 30, 6, 9, 13};
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(share(income[i], 10000) - inc_counts[i] / 249.0) <= tol);
    const double emp_counts[] = {155, 52, 3, 15, 24};
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(share(emp[i], 10000) - emp_counts[i] / 249.0) <= tol);

    CHECK(synthesize_population(default_population(500, 3)) == synthesize_population(default_population(500, 3)));
    CHECK(synthesize_population(default_population(500, 3)) != synthesize_population(default_population(500, 4)));
}

TEST_CASE("simulated datasets: validity, rotation, determinism") {
    const auto ds = test::small_dataset(14, 5);
    CHECK_NOTHROW(ds.validate());
    for (std::size_t q = 0; q < ds.respondents.size(); ++q)
        CHECK(ds.respondents[q].block_id == static_cast<int>(q % 6) + 1);
    CHECK(ds.respondents[6].block_id == 1);
    CHECK(rotated_block(7, 6) == 1);
    CHECK(rotated_block(6, 6) == 6);
    CHECK(rotated_block(5, 1) == 1);

    CHECK(test::small_dataset(14, 5) == ds);
    CHECK(test::small_dataset(14, 6) != ds);

    // Order independence: a respondent's answers do not depend on who else is
    // simulated, only on the block it gets.
    const auto pop = synthesize_population(default_population(12, 5));
    const auto all = simulate_dataset(pop, test::design54(), published_estimates(), 9);
    std::vector<RespondentRecord> tail(pop.begin() + 6, pop.end());
    const auto part = simulate_dataset(tail, test::design54(), published_estimates(), 9);
    for (std::size_t i = 0; i < 6; ++i) CHECK(part.respondents[i] == all.respondents[i + 6]);

    auto bad = published_estimates();
    bad[Param::SigmaS] = 0.0;
    CHECK_THROWS_AS(simulate_dataset(pop, test::design54(), bad, 1), ValidationError);
    auto short_design = test::design54();
    short_design.pop_back();
    CHECK_THROWS_AS(simulate_dataset(pop, short_design, published_estimates(), 1), ValidationError);
}

TEST_CASE("forced dominance and uniform kernel") {
    const auto pop = synthesize_population(default_population(5000, 11));
    auto p = flat_params();
    p[Param::BetaCostCs] = -50.0;
    const auto ds = simulate_dataset(pop, test::design54(), p, 2);
    std::size_t cs = 0, n = 0;
    for (const auto& r : ds.respondents) {
        const auto block = ds.block_tasks(r.block_id);
        for (std::size_t t = 0; t < block.size(); ++t) {
            if (block[t].cs_cost != 120.0) continue;
            ++n;
            cs += r.choices[t] == Choice::CS;
        }
    }
    REQUIRE(n > 0);
    CHECK(share(cs, n) < 0.05);

    const auto flat = simulate_dataset(pop, test::design54(), flat_params(), 3);
    std::array<std::size_t, 3> counts{};
    for (const auto& r : flat.respondents)
        for (auto c : r.choices) ++counts[static_cast<std::size_t>(c)];
    for (auto c : counts) CHECK(std::abs(share(c, 5000 * 9) - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("choice frequencies converge to the integrated kernel") {
    // Identical respondents isolate the sampling noise; the analytic side
    // integrates the structural and agent-effect draws over 4000 Halton points.
    const std::size_t N = 24000;
    const auto proto = test::valid_record("X");
    const auto pub = published_estimates();
    const auto ds = simulate_dataset(clones(N, proto), test::design54(), pub, 31);
    const auto draws = generate_draws({4000, DrawScheme::Halton, 0}, 1);

    for (int b = 1; b <= 6; ++b) {
        const auto block = ds.block_tasks(b);
        std::size_t n_b = 0;
        std::vector<std::array<std::size_t, 3>> freq(block.size());
        for (const auto& r : ds.respondents) {
            if (r.block_id != b) continue;
            ++n_b;
            for (std::size_t t = 0; t < block.size(); ++t) ++freq[t][static_cast<std::size_t>(r.choices[t])];
        }
        for (std::size_t t = 0; t < block.size(); ++t) {
            std::array<double, 3> prob{};
            for (int d = 0; d < 4000; ++d) {
                const double lv = structural_value(proto, pub, draws.at(0, d, 0));
                const auto u = task_utilities(block[t], proto, lv, draws.at(0, d, 1), pub);
                for (Choice c : {Choice::CS, Choice::CC, Choice::Store})
                    prob[static_cast<std::size_t>(c)] += logit_choice_prob(u, c) / 4000.0;
            }
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(std::abs(share(freq[t][c], n_b) - prob[c]) < 3.0 / std::sqrt(static_cast<double>(n_b)));
        }
    }

    // Likert marginals of the measured statements and the anchor.
    const auto th = ThresholdVector::from_deltas(pub[Param::Delta1], pub[Param::Delta2]);
    for (std::size_t k = 0; k <= kMeasured; ++k) {
        const bool anchor = k == kMeasured;
        const std::size_t stmt = anchor ? kAnchorStatement : kMeasuredStatements[k];
        std::array<double, 5> prob{};
        for (int d = 0; d < 4000; ++d) {
            const double lv = structural_value(proto, pub, draws.at(0, d, 0));
            const auto pr = anchor ? ordered_indicator_prob(lv, kAnchorIntercept, kAnchorLoading, kAnchorSigma, th)
                                   : ordered_indicator_prob(lv, pub[beta0_index(k)], pub[loading_index(k)],
                                                            pub[sigma_star_index(k)], th);
            for (std::size_t s = 0; s < 5; ++s) prob[s] += pr[s] / 4000.0;
        }
        std::array<std::size_t, 5> freq{};
        for (const auto& r : ds.respondents) ++freq[static_cast<std::size_t>(r.likert[stmt] - 1)];
        for (std::size_t s = 0; s < 5; ++s)
            CHECK(std::abs(share(freq[s], N) - prob[s]) < 3.0 / std::sqrt(static_cast<double>(N)));
    }

    // Statements outside the model follow the neutral distribution.
    std::array<std::size_t, 5> neutral{};
    for (const auto& r : ds.respondents) ++neutral[static_cast<std::size_t>(r.likert[0] - 1)];
    for (std::size_t s = 0; s < 5; ++s)
        CHECK(std::abs(share(neutral[s], N) - kNeutralLikert[s]) < 3.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("supply-side answers follow the documented conditionals") {
    const auto ds = test::small_dataset(6000, 19);
    std::array<std::size_t, 6> with_car{}, without_car{};
    std::size_t n_car = 0;
    for (const auto& r : ds.respondents) {
        CHECK(r.supply.remuneration_uah >= 50.0);
        CHECK(r.supply.remuneration_uah <= 120.0);
        CHECK(r.demand_remuneration_uah >= 50.0);
        CHECK(r.demand_remuneration_uah <= 120.0);
        CHECK(r.supply.detour_min >= 15.0);
        CHECK(r.supply.detour_min <= 60.0);
        for (const auto& imp : r.importance) CHECK((imp && *imp >= 1 && *imp <= 4));
        const auto m = static_cast<std::size_t>(std::find(kAllModes.begin(), kAllModes.end(), r.supply.cs_mode) -
                                                kAllModes.begin());
        if (r.car_in_household) {
            ++n_car;
            ++with_car[m];
        } else {
            ++without_car[m];
        }
    }
    const std::size_t n_nocar = ds.respondents.size() - n_car;
    for (std::size_t m = 0; m < 6; ++m) {
        CHECK(std::abs(share(with_car[m], n_car) - kModeSharesCar[m]) < 3.0 * 0.5 / std::sqrt(n_car));
        CHECK(std::abs(share(without_car[m], n_nocar) - kModeSharesNoCar[m]) < 3.0 * 0.5 / std::sqrt(n_nocar));
    }
}
