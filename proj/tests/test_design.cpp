#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "hcm/design.hpp"
#include "hcm/random.hpp"

using namespace hcm;

namespace {

// Log-determinant from the eigenvalues, independent of the Cholesky route.
double eigen_log_det(const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd M = X.transpose() * X / static_cast<double>(X.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    double s = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) s += std::log(eig.eigenvalues()[i]);
    return s;
}

Eigen::MatrixXd rows_of(const DesignTable& full, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), full.model_matrix.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) = full.model_matrix.row(static_cast<Eigen::Index>(idx[i]));
    return X;
}

const DesignTable& full576() {
    static const DesignTable t = enumerate_full_factorial(default_attributes());
    return t;
}

AttributeSpec levels(const std::string& name, std::initializer_list<double> codes, bool binary = false) {
    AttributeSpec a{name, Alternative::CS, {}, "", binary};
    for (double c : codes) a.levels.push_back({c, std::to_string(c)});
    return a;
}

}  // namespace

TEST_CASE("full factorial enumeration") {
    const auto& full = full576();
    CHECK(full.size() == 576);
    CHECK(full.n_columns() == 13);
    std::set<std::vector<double>> distinct(full.rows.begin(), full.rows.end());
    CHECK(distinct.size() == 576);
    // Every combination exactly once, decoded from a mixed-radix counter.
    std::size_t expected = 0;
    const auto attrs = default_attributes();
    for (std::size_t code = 0; code < 576; ++code) {
        std::vector<double> row(attrs.size());
        std::size_t rest = code;
        for (std::size_t a = attrs.size(); a-- > 0;) {
            row[a] = attrs[a].levels[rest % attrs[a].levels.size()].code;
            rest /= attrs[a].levels.size();
        }
        CHECK(distinct.count(row) == 1);
        ++expected;
    }
    CHECK(expected == 576);
    CHECK(std::is_sorted(full.rows.begin(), full.rows.end()));

    CHECK(enumerate_full_factorial({levels("b", {0, 1}, true)}).size() == 2);
    CHECK(enumerate_full_factorial({levels("x", {1, 2, 3}), levels("y", {1, 2, 3})}).size() == 9);
    CHECK_THROWS_AS(enumerate_full_factorial({}), InfeasibleDesign);
}

TEST_CASE("effects coding is balanced on the full factorial") {
    const auto& X = full576().model_matrix;
    CHECK(X.col(0).sum() == 576.0);
    for (Eigen::Index j = 1; j < X.cols(); ++j) CHECK(X.col(j).sum() == 0.0);
    CHECK(normalized_log_det(X) == doctest::Approx(eigen_log_det(X)).epsilon(1e-10));
}

TEST_CASE("D-optimal selection edge cases") {
    const auto& full = full576();
    const auto all = select_d_optimal(full, full.size());
    CHECK(all.fraction.size() == full.size());
    CHECK(all.log_det == doctest::Approx(normalized_log_det(full.model_matrix)).epsilon(1e-12));
    CHECK_THROWS_AS(select_d_optimal(full, 12), InfeasibleDesign);
    CHECK_THROWS_AS(select_d_optimal(full, 577), InfeasibleDesign);
    CHECK_NOTHROW(select_d_optimal(full, 13));
}

TEST_CASE("D-optimal fraction of 54") {
    const auto& full = full576();
    const auto res = select_d_optimal(full, 54, {7, 1000, 10});
    REQUIRE(res.fraction.size() == 54);
    CHECK(res.converged);
    std::set<std::size_t> uniq(res.candidate_rows.begin(), res.candidate_rows.end());
    CHECK(uniq.size() == 54);
    CHECK(std::is_sorted(res.candidate_rows.begin(), res.candidate_rows.end()));
    for (std::size_t i = 0; i < 54; ++i) CHECK(res.fraction.rows[i] == full.rows[res.candidate_rows[i]]);

    SUBCASE("reported criterion matches an eigenvalue oracle") {
        CHECK(res.log_det == doctest::Approx(eigen_log_det(rows_of(full, res.candidate_rows))).epsilon(1e-10));
    }
    SUBCASE("exchange trace ascends monotonically") {
        for (std::size_t i = 1; i < res.log_det_trace.size(); ++i)
            CHECK(res.log_det_trace[i] > res.log_det_trace[i - 1]);
        CHECK(res.log_det_trace.back() == doctest::Approx(res.log_det));
    }
    SUBCASE("no single-row exchange improves the determinant") {
        std::vector<char> in(full.size(), 0);
        for (auto r : res.candidate_rows) in[r] = 1;
        double best = -1e300;
        auto rows = res.candidate_rows;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            const auto keep = rows[a];
            for (std::size_t j = 0; j < full.size(); ++j) {
                if (in[j]) continue;
                rows[a] = j;
                best = std::max(best, normalized_log_det(rows_of(full, rows)));
            }
            rows[a] = keep;
        }
        CHECK(best <= res.log_det + 1e-9);
    }
    SUBCASE("same seed reproduces, other seeds still beat random subsets") {
        const auto again = select_d_optimal(full, 54, {7, 1000, 10});
        CHECK(again.candidate_rows == res.candidate_rows);
        RandomStream rng(99);
        std::vector<std::size_t> all(full.size());
        std::iota(all.begin(), all.end(), 0);
        double best_random = -1e300;
        for (int s = 0; s < 100; ++s) {
            rng.shuffle(std::span<std::size_t>(all));
            std::vector<std::size_t> pick(all.begin(), all.begin() + 54);
            best_random = std::max(best_random, eigen_log_det(rows_of(full, pick)));
        }
        CHECK(res.log_det > best_random);
    }
}

TEST_CASE("blocking") {
    const auto& full = full576();
    const auto fraction = select_d_optimal(full, 54, {}).fraction;
    const auto blocks = partition_blocks(fraction, 6, 3);
    REQUIRE(blocks.blocks.size() == 6);
    std::vector<std::size_t> seen;
    for (const auto& b : blocks.blocks) {
        CHECK(b.size() == 9);
        seen.insert(seen.end(), b.begin(), b.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> expect(54);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(seen == expect);

    // Oracle: recount level frequencies directly.
    double worst = 0.0;
    for (std::size_t a = 0; a < fraction.attributes.size(); ++a) {
        std::map<double, int> total;
        for (const auto& row : fraction.rows) ++total[row[a]];
        for (const auto& b : blocks.blocks) {
            std::map<double, int> in_block;
            for (auto r : b) ++in_block[fraction.rows[r][a]];
            for (const auto& [code, n] : total)
                worst = std::max(worst, std::abs(in_block[code] - n / 6.0));
        }
    }
    CHECK(worst <= 2.0);
    CHECK(max_level_deviation(fraction, blocks) == doctest::Approx(worst));

    const auto again = partition_blocks(fraction, 6, 3);
    CHECK(again.blocks == blocks.blocks);

    const auto single = partition_blocks(fraction, 1, 3);
    REQUIRE(single.blocks.size() == 1);
    CHECK(single.blocks[0].size() == 54);
    CHECK(max_level_deviation(fraction, single) == doctest::Approx(0.0));
    CHECK_THROWS_AS(partition_blocks(fraction, 5, 3), InfeasibleDesign);
    CHECK_THROWS_AS(partition_blocks(fraction, 0, 3), InfeasibleDesign);

    const auto tasks = to_choice_tasks(fraction, blocks);
    CHECK(tasks.size() == 54);
    std::map<int, std::set<int>> ids;
    for (const auto& t : tasks) {
        CHECK_NOTHROW(validate_task(t));
        ids[t.block_id].insert(t.task_id);
    }
    CHECK(ids.size() == 6);
    for (const auto& [b, s] : ids) CHECK(s == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("Orme rule") {
    CHECK(orme_minimum_sample(4, 9, 1) == 223);
    CHECK(orme_minimum_sample(4, 9, 2) == 112);
    CHECK(orme_minimum_sample(2, 1, 1) == 1000);
    CHECK(orme_minimum_sample(4, 9, 1) >= 200);
    CHECK(orme_minimum_sample(4, 9, 1) <= 250);
    CHECK_THROWS_AS(orme_minimum_sample(0, 9, 1), ValidationError);
    CHECK_THROWS_AS(orme_minimum_sample(4, -1, 1), ValidationError);
}
