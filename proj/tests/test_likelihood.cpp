#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hcm/estimator.hpp"
#include "hcm/likelihood.hpp"
#include "hcm/random.hpp"
#include "test_util.hpp"

using namespace hcm;

namespace {

double phi_oracle(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ParameterSet zero_params() {
    ParameterSet p;
    return p;
}

// Published point with multiplicative noise on the scales and additive noise
// elsewhere.
ParameterSet jitter(const ParameterSet& base, RandomStream& rng, double size) {
    ParameterSet p = base;
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (is_positive_param(i)) {
            p[i] *= std::exp(rng.uniform(-size, size));
        } else {
            p[i] += rng.uniform(-size, size);
        }
    }
    return p;
}

// R = 1 product written out by hand.
double direct_single_draw(const RespondentRecord& rec, const std::vector<ChoiceTask>& block,
                          const ParameterSet& p, double eps, double alpha) {
    const double lv = structural_value(rec, p, eps);
    double prod = 1.0;
    for (std::size_t t = 0; t < block.size(); ++t)
        prod *= logit_choice_prob(task_utilities(block[t], rec, lv, alpha, p), rec.choices[t]);
    const auto thr = ThresholdVector::from_deltas(p[Param::Delta1], p[Param::Delta2]);
    for (std::size_t k = 0; k < kMeasured; ++k) {
        const auto pr = ordered_indicator_prob(lv, p[beta0_index(k)], p[loading_index(k)],
                                               p[sigma_star_index(k)], thr);
        prod *= pr[static_cast<std::size_t>(rec.likert[kMeasuredStatements[k]] - 1)];
    }
    const auto pa = ordered_indicator_prob(lv, kAnchorIntercept, kAnchorLoading, kAnchorSigma, thr);
    prod *= pa[static_cast<std::size_t>(rec.likert[kAnchorStatement] - 1)];
    return prod;
}

}  // namespace

TEST_CASE("thresholds") {
    const auto t = ThresholdVector::from_deltas(0.653, 0.752);
    CHECK(t.tau[0] == doctest::Approx(-1.405));
    CHECK(t.tau[1] == doctest::Approx(-0.653));
    CHECK(t.tau[2] == doctest::Approx(0.653));
    CHECK(t.tau[3] == doctest::Approx(1.405));
    CHECK(std::is_sorted(t.tau.begin(), t.tau.end()));
}

TEST_CASE("structural equation") {
    std::array<double, kStructuralCovariates> x{};
    ParameterSet p;
    p[Param::SigmaS] = 1.0;
    CHECK(structural_value(x, p, 0.0) == 0.0);
    const auto pub = published_estimates();
    CHECK(structural_value(x, pub, 0.0) == doctest::Approx(2.15).epsilon(1e-12));
    x[0] = 1.0;  // 10,000 UAH
    CHECK(structural_value(x, pub, 0.0) == doctest::Approx(2.15 - 0.182).epsilon(1e-12));
    x[0] = 0.0;
    CHECK(structural_value(x, pub, 1.0) == doctest::Approx(2.15 + pub[Param::SigmaS]).epsilon(1e-12));
}

TEST_CASE("ordered indicator probabilities") {
    const auto thr = ThresholdVector::from_deltas(0.653, 0.752);
    const auto p = ordered_indicator_prob(0.0, 0.0, 1.0, 1.0, thr);
    CHECK(p[2] == doctest::Approx(2.0 * phi_oracle(0.653) - 1.0).epsilon(1e-13));
    CHECK(p[2] == doctest::Approx(0.4862).epsilon(1e-3));
    CHECK(p[0] == doctest::Approx(p[4]).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(phi_oracle(-0.653) - phi_oracle(-1.405)).epsilon(1e-12));

    RandomStream rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto t = ThresholdVector::from_deltas(std::exp(rng.uniform(-3, 2)), std::exp(rng.uniform(-3, 2)));
        const auto q = ordered_indicator_prob(rng.uniform(-10, 10), rng.uniform(-5, 5), rng.uniform(-3, 3),
                                              std::exp(rng.uniform(-3, 2)), t);
        const double s = std::accumulate(q.begin(), q.end(), 0.0);
        CHECK(std::abs(s - 1.0) <= 1e-12);
        for (double v : q) CHECK(v >= 0.0);
    }
    CHECK(ordered_indicator_prob(1e6, 0.0, 1.0, 1.0, thr)[4] == doctest::Approx(1.0));
    CHECK(ordered_indicator_prob(-1e6, 0.0, 1.0, 1.0, thr)[0] == doctest::Approx(1.0));
}

TEST_CASE("utilities and logit kernel") {
    const auto rec = test::valid_record("A");
    ChoiceTask task{1, 1, 50.0, 1.0, 1, 0, 70.0, 3.0};
    const auto zero = task_utilities(task, rec, 1.3, 0.4, zero_params());
    CHECK(zero.cs == 0.0);
    CHECK(zero.cc == 0.0);
    CHECK(zero.store == 0.0);

    const auto pub = published_estimates();
    const auto u = task_utilities(task, rec, 0.0, 0.0, pub);
    CHECK(u.cc == doctest::Approx(-3.05 * 0.70 - 0.621 * 0.30).epsilon(1e-12));
    CHECK(u.cc == doctest::Approx(-2.3213).epsilon(1e-12));
    auto two_kids = rec;
    two_kids.n_children = 2;
    CHECK(task_utilities(task, two_kids, 0.0, 0.0, pub).store == doctest::Approx(-2.486).epsilon(1e-12));

    // CS by hand: ASC + cost + time + income interactions + LV + agent effect.
    const double inc = rec.income_uah_month / kIncomeScale;
    const double lv = 1.7, alpha = -0.6;
    const double cs = pub[Param::AscCs] + pub[Param::BetaCostCs] * 0.5 + pub[Param::BetaTimeCs] * 0.1 +
                      pub[Param::BetaCo2] * 1 * inc + pub[Param::BetaLv] * lv +
                      pub[Param::SigmaAlpha] * alpha;
    CHECK(task_utilities(task, rec, lv, alpha, pub).cs == doctest::Approx(cs).epsilon(1e-12));

    CHECK(logit_choice_prob({0, 0, 0}, Choice::Store) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(logit_choice_prob({0, std::log(2.0), 0}, Choice::CC) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(logit_choice_prob({50, 0, 0}, Choice::CS) - 1.0) <= 1e-12);
    CHECK(logit_choice_prob({800, 0, 0}, Choice::CS) == 1.0);
    CHECK(logit_choice_prob({800, 0, 0}, Choice::CC) >= 0.0);

    RandomStream rng(9);
    for (int i = 0; i < 2000; ++i) {
        Utilities v{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
        const double s = logit_choice_prob(v, Choice::CS) + logit_choice_prob(v, Choice::CC) +
                         logit_choice_prob(v, Choice::Store);
        CHECK(std::abs(s - 1.0) <= 1e-12);
        const double c = rng.uniform(-100, 100);
        Utilities w{v.cs + c, v.cc + c, v.store + c};
        for (Choice ch : {Choice::CS, Choice::CC, Choice::Store})
            CHECK(std::abs(logit_choice_prob(v, ch) - logit_choice_prob(w, ch)) <= 1e-12);
    }
}

TEST_CASE("Halton and pseudo-random draws") {
    CHECK(halton_value(1, 2) == 0.5);
    CHECK(halton_value(2, 2) == 0.25);
    CHECK(halton_value(3, 2) == 0.75);
    CHECK(halton_value(1, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(halton_value(4, 3) == doctest::Approx(1.0 / 9.0 + 1.0 / 3.0));
    CHECK(norm_quantile(0.5) == 0.0);

    const DrawConfig cfg{1000, DrawScheme::Halton, 0};
    const auto d = generate_draws(cfg, 3);
    // Respondent 0 starts after the skipped points.
    CHECK(d.at(0, 0, 0) == doctest::Approx(norm_quantile(halton_value(kHaltonSkip + 1, 2))).epsilon(1e-14));
    CHECK(d.at(1, 0, 1) == doctest::Approx(norm_quantile(halton_value(kHaltonSkip + 1001, 3))).epsilon(1e-14));
    // Halton segments are balanced enough that every respondent's means
    // meet the 3/sqrt(R) bound.
    const auto h = generate_draws({1000, DrawScheme::Halton, 4}, 200);
    for (std::size_t q = 0; q < 200; ++q)
        for (int c = 0; c < 2; ++c) {
            double s = 0;
            for (int r = 0; r < 1000; ++r) s += h.at(q, r, c);
            CHECK(std::abs(s / 1000.0) < 3.0 / std::sqrt(1000.0));
        }
    // Pseudo-random means are N(0, 1/R): check the spread of the scaled
    // means and the share outside the 3/sqrt(R) bound over many streams.
    const auto m = generate_draws({1000, DrawScheme::PseudoRandom, 4}, 2000);
    double sum_z2 = 0.0;
    int outside = 0, non_finite = 0;
    for (std::size_t q = 0; q < 2000; ++q)
        for (int c = 0; c < 2; ++c) {
            double s = 0;
            for (int r = 0; r < 1000; ++r) {
                non_finite += !std::isfinite(m.at(q, r, c));
                s += m.at(q, r, c);
            }
            const double z = s / std::sqrt(1000.0);
            sum_z2 += z * z;
            outside += std::abs(z) > 3.0;
        }
    CHECK(sum_z2 / 4000.0 == doctest::Approx(1.0).epsilon(0.1));
    CHECK(outside <= 40);
    CHECK(non_finite == 0);
    const auto a = generate_draws({50, DrawScheme::PseudoRandom, 11}, 4);
    const auto b = generate_draws({50, DrawScheme::PseudoRandom, 11}, 4);
    const auto c = generate_draws({50, DrawScheme::PseudoRandom, 12}, 4);
    CHECK(std::equal(a.respondent(3).begin(), a.respondent(3).end(), b.respondent(3).begin()));
    CHECK(!std::equal(a.respondent(3).begin(), a.respondent(3).end(), c.respondent(3).begin()));

    // Keyed by id: the same id gets the same row whatever the list order.
    const auto ab = generate_draws(cfg, std::vector<std::string>{"R2", "R1"});
    const auto ba = generate_draws(cfg, std::vector<std::string>{"R1", "R2"});
    CHECK(std::equal(ab.respondent(0).begin(), ab.respondent(0).end(), ba.respondent(1).begin()));
}

TEST_CASE("respondent probability routes agree") {
    const auto ds = test::small_dataset(20, 31);
    const auto pub = published_estimates();
    const auto draws = generate_draws({40, DrawScheme::Halton, 0}, 20);
    const auto panel = Panel::build(ds);
    for (std::size_t q = 0; q < ds.respondents.size(); ++q) {
        const auto& rec = ds.respondents[q];
        const auto block = ds.block_tasks(rec.block_id);
        const auto row = draws.respondent(q);
        const double direct = simulated_respondent_prob(rec, block, pub, row);
        const double logp = log_simulated_respondent_prob(rec, block, pub, row);
        REQUIRE(direct > 0.0);
        CHECK(std::abs(std::exp(logp) - direct) <= 1e-10 * direct);
        // Panel route (rows sorted by id; the fixture ids are already sorted).
        REQUIRE(panel.respondents[q].id == rec.id);
        CHECK(respondent_log_prob(panel.respondents[q], row, pub, {}) == doctest::Approx(logp).epsilon(1e-12));

        const auto one = row.subspan(0, 2);
        CHECK(simulated_respondent_prob(rec, block, pub, one) ==
              doctest::Approx(direct_single_draw(rec, block, pub, one[0], one[1])).epsilon(1e-12));
    }
    const auto& rec = ds.respondents[0];
    const auto block = ds.block_tasks(rec.block_id);
    ModelOptions choice_only{false, false};
    CHECK(simulated_respondent_prob(rec, block, zero_params(), draws.respondent(0), choice_only) ==
          doctest::Approx(std::pow(1.0 / 3.0, 9)).epsilon(1e-14));

    // A long panel underflows in direct space but not in log space.
    auto pushed = pub;
    pushed[Param::AscStore] = -400.0;
    auto stored = rec;
    stored.choices.assign(kTasksPerRespondent, Choice::Store);
    CHECK(simulated_respondent_prob(stored, block, pushed, draws.respondent(0)) == 0.0);
    const double lp = log_simulated_respondent_prob(stored, block, pushed, draws.respondent(0));
    CHECK(std::isfinite(lp));
    CHECK(lp < -3000.0);
}

TEST_CASE("null choice-only log-likelihood on 249 x 9") {
    const auto ds = test::small_dataset(249, 5);
    const ModelOptions choice_only{false, false};
    const double ll = total_log_likelihood(ds, zero_params(), {100, DrawScheme::Halton, 0}, choice_only);
    CHECK(std::abs(ll - 2241.0 * std::log(1.0 / 3.0)) <= 1e-6);
    const auto panel = Panel::build(ds);
    CHECK(panel.n_observations() == 2241);
    CHECK(null_log_likelihood(panel, choice_only) == doctest::Approx(2241.0 * std::log(1.0 / 3.0)));
    CHECK(null_log_likelihood(panel, {}) ==
          doctest::Approx(2241.0 * std::log(1.0 / 3.0) + 249.0 * 7.0 * std::log(0.2)));

    auto single = ds;
    single.respondents.resize(1);
    CHECK(total_log_likelihood(single, zero_params(), {10, DrawScheme::Halton, 0}, choice_only) ==
          doctest::Approx(9.0 * std::log(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("analytic gradient and finite differences") {
    const auto ds = test::small_dataset(50, 17);
    const auto panel = Panel::build(ds);
    const auto draws = generate_draws({100, DrawScheme::Halton, 0}, panel.ids());
    RandomStream rng(2024);
    for (int point = 0; point < 5; ++point) {
        const auto p = jitter(published_estimates(), rng, 0.2);
        const auto g4 = finite_difference_gradient(panel, draws, p, {}, 1e-4);
        const auto g5 = finite_difference_gradient(panel, draws, p, {}, 1e-5);
        const auto g6 = finite_difference_gradient(panel, draws, p, {}, 1e-6);
        CHECK((g4 - g5).norm() / g5.norm() < 1e-5);
        CHECK((g6 - g5).norm() / g5.norm() < 1e-5);
        const auto an = evaluate_likelihood(panel, draws, p, {}, true).gradient;
        CHECK((an - g5).norm() / g5.norm() < 1e-5);

        const ModelOptions choice_only{false, false};
        const auto an_c = evaluate_likelihood(panel, draws, p, choice_only, true).gradient;
        const auto fd_c = finite_difference_gradient(panel, draws, p, choice_only, 1e-5);
        CHECK((an_c - fd_c).norm() / fd_c.norm() < 1e-5);
    }
}

TEST_CASE("evaluation is invariant to threads and respondent order") {
    auto ds = test::small_dataset(60, 23);
    const auto pub = published_estimates();
    const DrawConfig cfg{50, DrawScheme::Halton, 0};
    const auto panel = Panel::build(ds);
    const auto draws = generate_draws(cfg, panel.ids());
    const auto one = evaluate_likelihood(panel, draws, pub, {}, true, 1);
    const auto four = evaluate_likelihood(panel, draws, pub, {}, true, 4);
    CHECK(one.log_likelihood == four.log_likelihood);
    CHECK(one.gradient == four.gradient);
    CHECK(one.respondent_ll == four.respondent_ll);
    CHECK(pairwise_sum(one.respondent_ll) == one.log_likelihood);

    const double base = total_log_likelihood(ds, pub, cfg);
    RandomStream rng(3);
    rng.shuffle(std::span<RespondentRecord>(ds.respondents));
    CHECK(total_log_likelihood(ds, pub, cfg) == base);
    CHECK(total_log_likelihood(ds, pub, cfg, {}, 3) == base);
}

TEST_CASE("true parameters beat perturbed ones on simulated data") {
    const auto ds = test::small_dataset(500, 77);
    const auto pub = published_estimates();
    const DrawConfig cfg{100, DrawScheme::Halton, 0};
    const double truth = total_log_likelihood(ds, pub, cfg);
    RandomStream rng(8);
    for (int i = 0; i < 5; ++i) {
        const auto p = jitter(pub, rng, 0.5);
        CHECK(total_log_likelihood(ds, p, cfg) < truth);
    }
}
