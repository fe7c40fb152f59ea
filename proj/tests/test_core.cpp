#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "hcm/core.hpp"
#include "hcm/dataset_io.hpp"
#include "hcm/normal.hpp"
#include "hcm/random.hpp"
#include "hcm/simulator.hpp"
#include "test_util.hpp"

using namespace hcm;

TEST_CASE("time level coding uses interval midpoints") {
    CHECK(code_time_level(Channel::CS, 1) == 1.5);
    CHECK(code_time_level(Channel::CC, 3) == 18.0);
    CHECK(code_time_level(Channel::CC, 4) == 30.0);
    // Enumeration: CS bins 0-3-6-9-open, CC bins 0-6-12-24-open; the open bin
    // sits half a prior width above its lower edge.
    const double cs[] = {1.5, 4.5, 7.5, 10.5};
    const double cc[] = {3, 9, 18, 30};
    for (int i = 1; i <= 4; ++i) {
        CHECK(code_time_level(Channel::CS, i) == cs[i - 1]);
        CHECK(code_time_level(Channel::CC, i) == cc[i - 1]);
        if (i > 1) {
            CHECK(code_time_level(Channel::CS, i) > code_time_level(Channel::CS, i - 1));
            CHECK(code_time_level(Channel::CC, i) > code_time_level(Channel::CC, i - 1));
        }
    }
    CHECK_THROWS_AS(code_time_level(Channel::CS, 0), CodingError);
    CHECK_THROWS_AS(code_time_level(Channel::CC, 5), CodingError);
    CHECK(time_level_label(Channel::CS, 1.5) == "3 hours or less");
    CHECK_THROWS_AS(time_level_label(Channel::CC, 4.0), CodingError);
}

TEST_CASE("scaling examples") {
    RespondentRecord r = test::valid_record("A");
    ChoiceTask t{1, 1, 90, 4.5, 1, 1, 100, 18};
    r.income_uah_month = 10000;
    auto f = scale_covariates(r, t);
    CHECK(f.cc_cost == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.income == doctest::Approx(1.0).epsilon(1e-15));
    r.income_uah_month = 20000;
    f = scale_covariates(r, t);
    CHECK(f.flex_income == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f.co2_income == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f.cs_time == doctest::Approx(0.45));
}

TEST_CASE("scaling is invertible over the whole level grid") {
    RespondentRecord r = test::valid_record("A");
    for (double income : kIncomeBandMidpoints) {
        r.income_uah_month = income;
        for (double csc : {60.0, 90.0, 120.0})
            for (int csl = 1; csl <= 4; ++csl)
                for (int co2 : {0, 1})
                    for (int flex : {0, 1})
                        for (double ccc : {50.0, 75.0, 100.0})
                            for (int ccl = 1; ccl <= 4; ++ccl) {
                                ChoiceTask t{1, 1, csc, code_time_level(Channel::CS, csl), co2, flex, ccc,
                                             code_time_level(Channel::CC, ccl)};
                                const auto u = unscale(scale_covariates(r, t));
                                CHECK(std::abs(u.cs_cost - csc) <= 1e-12);
                                CHECK(std::abs(u.cs_time - t.cs_time) <= 1e-12);
                                CHECK(std::abs(u.cc_cost - ccc) <= 1e-12);
                                CHECK(std::abs(u.cc_time - t.cc_time) <= 1e-12);
                                CHECK(std::abs(u.income - income) <= 1e-12 * income);
                                CHECK(std::abs(u.co2 - co2) <= 1e-12);
                                CHECK(std::abs(u.flex - flex) <= 1e-12);
                            }
    }
}

TEST_CASE("attribute specs and task validation") {
    const auto attrs = default_attributes();
    REQUIRE(attrs.size() == 6);
    std::size_t product = 1;
    for (const auto& a : attrs) {
        CHECK_NOTHROW(a.validate());
        product *= a.levels.size();
    }
    CHECK(product == 576);

    AttributeSpec one{"x", Alternative::CS, {{1.0, "a"}}, "", false};
    CHECK_THROWS_AS(one.validate(), ValidationError);
    AttributeSpec unordered{"x", Alternative::CS, {{2.0, "a"}, {1.0, "b"}}, "", false};
    CHECK_THROWS_AS(unordered.validate(), ValidationError);
    AttributeSpec bad_binary{"x", Alternative::CS, {{0.0, "no"}, {2.0, "yes"}}, "", true};
    CHECK_THROWS_AS(bad_binary.validate(), ValidationError);

    CHECK_NOTHROW(validate_task({1, 1, 60, 1.5, 0, 1, 50, 3}));
    CHECK_THROWS_AS(validate_task({1, 1, 70, 1.5, 0, 1, 50, 3}), ValidationError);
    CHECK_THROWS_AS(validate_task({1, 1, 60, 2.0, 0, 1, 50, 3}), ValidationError);
    CHECK_THROWS_AS(validate_task({1, 1, 60, 1.5, 2, 1, 50, 3}), ValidationError);
    CHECK_THROWS_AS(validate_task({1, 1, 60, 1.5, 0, 1, 50, 4}), ValidationError);
}

TEST_CASE("respondent invariants are itemized") {
    auto r = test::valid_record("A");
    CHECK(check_respondent(r).empty());
    r.likert[2] = 0;
    r.choices.pop_back();
    r.income_uah_month = 0;
    const auto errs = check_respondent(r);
    const std::set<std::string> got(errs.begin(), errs.end());
    CHECK(got.count("likert.F3: out of range 1..5") == 1);
    CHECK(got.count("income_uah_month: must be positive") == 1);
    CHECK(errs.size() == 3);
}

TEST_CASE("income bands") {
    CHECK(income_band_midpoint(1) == 2500.0);
    CHECK(income_band_midpoint(7) == 55000.0);
    CHECK_THROWS_AS(income_band_midpoint(0), CodingError);
    CHECK_THROWS_AS(income_band_midpoint(8), CodingError);
}

TEST_CASE("structural covariates") {
    auto r = test::valid_record("A");
    r.age_years = 31;
    r.employment = Employment::Part;
    r.education_high = true;
    r.household_size = 3;
    r.gender = Gender::Male;
    r.car_in_household = false;
    r.income_uah_month = 15000;
    const auto x = structural_covariates(r);
    const std::array<double, 7> want = {1.5, 1, 1, 1, 1, 1, 1};
    for (std::size_t i = 0; i < 7; ++i) CHECK(x[i] == want[i]);
    r.age_years = 30;
    r.household_size = 2;
    r.car_in_household = true;
    const auto y = structural_covariates(r);
    CHECK(y[1] == 0.0);
    CHECK(y[4] == 0.0);
    CHECK(y[6] == 0.0);
}

TEST_CASE("parameter names and published values") {
    CHECK(kNumParams == 40);
    std::set<std::string> names;
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const std::string n(param_name(i));
        CHECK(names.insert(n).second);
        CHECK(param_index(n) == i);
    }
    CHECK(!param_index("NOPE").has_value());
    const auto p = published_estimates();
    CHECK(p[Param::BetaCostCs] == -1.95);
    CHECK(p[Param::BetaTimeCs] == -1.44);
    CHECK(p[Param::BetaCostCc] == -3.05);
    CHECK(p[Param::BetaTimeCc] == -0.621);
    CHECK(p[Param::SigmaAlpha] == 0.528);
    CHECK(p[Param::Delta1] == 0.653);
    CHECK(p[Param::SigmaS] == 0.815);
    for (std::size_t i = 0; i < kNumParams; ++i)
        if (is_positive_param(i)) CHECK(p[i] > 0.0);
    std::size_t groups = 0;
    for (std::size_t i = 0; i < kNumParams; ++i)
        groups += is_choice_param(i) + is_measurement_param(i) + is_structural_param(i);
    CHECK(groups == kNumParams);
}

TEST_CASE("normal distribution helpers") {
    CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(norm_sf(8.0) > 0.0);
    for (double p : {1e-10, 0.001, 0.2, 0.5, 0.77, 0.999}) CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
    CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327));
}

TEST_CASE("random streams are deterministic and keyed") {
    RandomStream a(5, std::string_view("R00001")), b(5, std::string_view("R00001")), c(5, std::string_view("R00002"));
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x != c.uniform());
    RandomStream d(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = d.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        CHECK(d.below(7) < 7);
    }
}

TEST_CASE("dataset files round-trip") {
    const auto dir = test::temp_dir("core_roundtrip");
    const Dataset ds = test::small_dataset(30, 11);
    const auto paths = DatasetPaths::in_directory(dir);
    write_dataset(ds, paths);
    const Dataset back = read_dataset(paths);
    CHECK(back == ds);

    // Byte-identical re-export.
    const auto dir2 = test::temp_dir("core_roundtrip2");
    write_dataset(back, DatasetPaths::in_directory(dir2));
    for (const char* f : {"design.csv", "respondents.csv", "likert.csv", "choices.csv", "attrs.json"})
        CHECK(read_text_file(dir / f) == read_text_file(dir2 / f));
}

TEST_CASE("two-respondent fixture reads into two records") {
    const auto dir = test::temp_dir("core_fixture");
    Dataset ds = test::small_dataset(2, 3);
    write_dataset(ds, DatasetPaths::in_directory(dir));
    CHECK(read_dataset(DatasetPaths::in_directory(dir)).respondents.size() == 2);
}

TEST_CASE("schema violations name file, row and column") {
    const auto dir = test::temp_dir("core_bad");
    const Dataset ds = test::small_dataset(2, 3);
    const auto paths = DatasetPaths::in_directory(dir);
    write_dataset(ds, paths);
    std::string likert = read_text_file(paths.likert);
    // Third data row (row 4 counting the header) gets a score of 6.
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) pos = likert.find('\n', pos) + 1;
    const std::size_t end = likert.find('\n', pos);
    const std::size_t comma = likert.rfind(',', end);
    likert.replace(comma + 1, end - comma - 1, "6");
    write_text_file(paths.likert, likert);
    try {
        read_dataset(paths);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.file() == paths.likert.string());
        CHECK(e.row() == 4);
        CHECK(e.column() == "score");
    }

    write_dataset(ds, paths);
    std::string design = read_text_file(paths.design);
    design.replace(design.find('\n') + 1, 1, "x");
    write_text_file(paths.design, design);
    try {
        read_dataset(paths);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == "block_id");
    }
}

TEST_CASE("dataset validation rejects a block outside the design") {
    Dataset ds = test::small_dataset(3, 3);
    ds.respondents[0].block_id = 99;
    CHECK_THROWS_AS(ds.validate(), ValidationError);
}

TEST_CASE("parameter JSON round-trip and errors") {
    const auto p = published_estimates();
    CHECK(parse_params_json(params_json(p), "mem") == p);
    auto j = params_json(p);
    const auto pos = j.find("\"SIGMA_S\"");
    auto broken = j;
    broken.replace(pos, 9, "\"SIGMA_X\"");
    CHECK_THROWS_AS(parse_params_json(broken, "mem"), ParseError);
    auto neg = default_start_values();
    neg[Param::SigmaS] = -1.0;
    CHECK_THROWS_AS(parse_params_json(params_json(neg), "mem"), ParseError);
    CHECK_THROWS_AS(parse_params_json("{", "mem"), ParseError);
}

TEST_CASE("shortest number formatting round-trips") {
    RandomStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(12)) - 4);
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(60.0) == "60");
    CHECK(format_number(1.5) == "1.5");
}
