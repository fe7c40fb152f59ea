#include "hcm/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hcm/random.hpp"

namespace hcm {

namespace {

std::size_t level_position(const AttributeSpec& a, double code) {
    for (std::size_t i = 0; i < a.levels.size(); ++i)
        if (a.levels[i].code == code) return i;
    throw ValidationError("attribute " + a.name + ": code not on its level set");
}

DesignTable subset(const DesignTable& full, const std::vector<std::size_t>& rows) {
    DesignTable out;
    out.attributes = full.attributes;
    out.model_matrix.resize(static_cast<Eigen::Index>(rows.size()), full.model_matrix.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.rows.push_back(full.rows[rows[i]]);
        out.model_matrix.row(static_cast<Eigen::Index>(i)) =
            full.model_matrix.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

struct Information {
    Eigen::MatrixXd inverse;
    double log_det = -std::numeric_limits<double>::infinity();
};

std::optional<Information> information(const Eigen::MatrixXd& X,
                                       const std::vector<std::size_t>& rows) {
    const Eigen::Index p = X.cols();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
    for (auto r : rows) {
        const auto x = X.row(static_cast<Eigen::Index>(r));
        M.noalias() += x.transpose() * x;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 1e-10 * diag.maxCoeff()).any()) return std::nullopt;
    Information info;
    info.log_det = 2.0 * diag.array().log().sum();
    info.inverse = llt.solve(Eigen::MatrixXd::Identity(p, p));
    return info;
}

struct ExchangeRun {
    std::vector<std::size_t> rows;
    double log_det;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

ExchangeRun fedorov(const Eigen::MatrixXd& X, std::vector<std::size_t> rows, int max_iter) {
    const auto n = static_cast<std::size_t>(X.rows());
    auto info = information(X, rows);
    ExchangeRun run{rows, info->log_det, {info->log_det}, 0, false};

    std::vector<char> in_design(n, 0);
    for (auto r : rows) in_design[r] = 1;

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd A = X * info->inverse;  // n x p
        const Eigen::VectorXd d = (A.array() * X.array()).rowwise().sum();
        double best = 1.0 + 1e-10;
        std::size_t best_out = 0, best_in = 0;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            const std::size_t i = rows[a];
            const auto ai = A.row(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < n; ++j) {
                if (in_design[j]) continue;
                const double dij = ai.dot(X.row(static_cast<Eigen::Index>(j)));
                const double ratio = (1.0 + d[j]) * (1.0 - d[i]) + dij * dij;
                if (ratio > best) {
                    best = ratio;
                    best_out = a;
                    best_in = j;
                }
            }
        }
        if (best <= 1.0 + 1e-10) {
            run.converged = true;
            break;
        }
        in_design[rows[best_out]] = 0;
        in_design[best_in] = 1;
        rows[best_out] = best_in;
        auto next = information(X, rows);
        if (!next || next->log_det <= info->log_det) {
            // Rank-one ratio and refactorized determinant disagree only at
            // rounding level; stop rather than cycle.
            run.converged = true;
            break;
        }
        info = std::move(next);
        run.trace.push_back(info->log_det);
        run.iterations = it + 1;
    }
    std::sort(rows.begin(), rows.end());
    run.rows = std::move(rows);
    run.log_det = info->log_det;
    return run;
}

}  // namespace

Eigen::MatrixXd effects_model_matrix(const std::vector<AttributeSpec>& attributes,
                                     const std::vector<std::vector<double>>& rows) {
    Eigen::Index p = 1;
    for (const auto& a : attributes) p += static_cast<Eigen::Index>(a.levels.size()) - 1;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        X(row, 0) = 1.0;
        Eigen::Index col = 1;
        for (std::size_t a = 0; a < attributes.size(); ++a) {
            const auto m = static_cast<Eigen::Index>(attributes[a].levels.size());
            const auto pos = static_cast<Eigen::Index>(level_position(attributes[a], rows[r][a]));
            if (pos == m - 1) {
                X.block(row, col, 1, m - 1).setConstant(-1.0);
            } else {
                X(row, col + pos) = 1.0;
            }
            col += m - 1;
        }
    }
    return X;
}

double normalized_log_det(const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd M = X.transpose() * X / static_cast<double>(X.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    return 2.0 * diag.array().log().sum();
}

DesignTable enumerate_full_factorial(const std::vector<AttributeSpec>& attributes) {
    if (attributes.empty()) throw InfeasibleDesign("full factorial needs at least one attribute");
    for (const auto& a : attributes) a.validate();

    std::size_t n = 1;
    for (const auto& a : attributes) n *= a.levels.size();

    DesignTable table;
    table.attributes = attributes;
    table.rows.reserve(n);
    std::vector<std::size_t> counter(attributes.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> row(attributes.size());
        for (std::size_t a = 0; a < attributes.size(); ++a) row[a] = attributes[a].levels[counter[a]].code;
        table.rows.push_back(std::move(row));
        for (std::size_t a = attributes.size(); a-- > 0;) {
            if (++counter[a] < attributes[a].levels.size()) break;
            counter[a] = 0;
        }
    }
    table.model_matrix = effects_model_matrix(attributes, table.rows);
    return table;
}

DOptimalResult select_d_optimal(const DesignTable& full, std::size_t k,
                                const DOptimalOptions& options) {
    const std::size_t n = full.size();
    const auto p = static_cast<std::size_t>(full.n_columns());
    if (k < p)
        throw InfeasibleDesign("fraction of " + std::to_string(k) + " rows cannot support " +
                               std::to_string(p) + " model columns");
    if (k > n)
        throw InfeasibleDesign("fraction of " + std::to_string(k) + " rows exceeds " +
                               std::to_string(n) + " candidates");

    const double log_k = std::log(static_cast<double>(k));
    const auto normalize = [&](double ld) { return ld - static_cast<double>(p) * log_k; };

    if (k == n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        DOptimalResult res;
        res.fraction = full;
        res.candidate_rows = all;
        res.log_det = normalized_log_det(full.model_matrix);
        res.log_det_trace = {res.log_det};
        return res;
    }

    std::optional<ExchangeRun> best;
    const int restarts = std::max(1, options.restarts);
    for (int s = 0; s < restarts; ++s) {
        RandomStream rng(options.seed, static_cast<std::uint64_t>(s));
        std::vector<std::size_t> start;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), 0);
            // Partial Fisher-Yates: first k entries form the start.
            for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
            start.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
            ok = information(full.model_matrix, start).has_value();
        }
        if (!ok) throw InfeasibleDesign("no nonsingular random start found");
        auto run = fedorov(full.model_matrix, start, options.max_iter);
        if (!best || run.log_det > best->log_det) best = std::move(run);
    }

    DOptimalResult res;
    res.candidate_rows = best->rows;
    res.fraction = subset(full, best->rows);
    res.log_det = normalize(best->log_det);
    for (double ld : best->trace) res.log_det_trace.push_back(normalize(ld));
    res.iterations = best->iterations;
    res.converged = best->converged;
    return res;
}

namespace {

// Per-block level counts against the fraction-wide share.
class BlockBalance {
public:
    BlockBalance(const DesignTable& fraction, std::size_t n_blocks) : fraction_(fraction) {
        std::size_t offset = 0;
        for (const auto& a : fraction.attributes) {
            offsets_.push_back(offset);
            offset += a.levels.size();
        }
        n_levels_ = offset;
        positions_.resize(fraction.size());
        std::vector<double> totals(n_levels_, 0.0);
        for (std::size_t r = 0; r < fraction.size(); ++r) {
            for (std::size_t a = 0; a < fraction.attributes.size(); ++a) {
                const std::size_t slot =
                    offsets_[a] + level_position(fraction.attributes[a], fraction.rows[r][a]);
                positions_[r].push_back(slot);
                totals[slot] += 1.0;
            }
        }
        target_.resize(n_levels_);
        for (std::size_t l = 0; l < n_levels_; ++l) target_[l] = totals[l] / static_cast<double>(n_blocks);
        counts_.assign(n_blocks, std::vector<double>(n_levels_, 0.0));
    }

    void add(std::size_t block, std::size_t row, double sign = 1.0) {
        for (auto slot : positions_[row]) counts_[block][slot] += sign;
    }

    // (max deviation, sum of squared deviations); compared lexicographically.
    std::pair<double, double> score() const {
        double mx = 0.0, ss = 0.0;
        for (const auto& c : counts_) {
            for (std::size_t l = 0; l < n_levels_; ++l) {
                const double dev = std::abs(c[l] - target_[l]);
                mx = std::max(mx, dev);
                ss += dev * dev;
            }
        }
        return {mx, ss};
    }

    // Score restricted to blocks that have received rows so far.
    std::pair<double, double> partial_score(const std::vector<std::size_t>& fill,
                                            std::size_t capacity) const {
        double mx = 0.0, ss = 0.0;
        for (std::size_t b = 0; b < counts_.size(); ++b) {
            const double frac = static_cast<double>(fill[b]) / static_cast<double>(capacity);
            for (std::size_t l = 0; l < n_levels_; ++l) {
                const double dev = std::abs(counts_[b][l] - target_[l] * frac);
                mx = std::max(mx, dev);
                ss += dev * dev;
            }
        }
        return {mx, ss};
    }

private:
    const DesignTable& fraction_;
    std::vector<std::size_t> offsets_;
    std::size_t n_levels_ = 0;
    std::vector<std::vector<std::size_t>> positions_;
    std::vector<double> target_;
    std::vector<std::vector<double>> counts_;
};

bool better(std::pair<double, double> a, std::pair<double, double> b) {
    constexpr double eps = 1e-12;
    if (a.first < b.first - eps) return true;
    if (a.first > b.first + eps) return false;
    return a.second < b.second - eps;
}

}  // namespace

BlockSet partition_blocks(const DesignTable& fraction, std::size_t n_blocks, std::uint64_t seed) {
    const std::size_t n = fraction.size();
    if (n_blocks == 0) throw InfeasibleDesign("number of blocks must be positive");
    if (n % n_blocks != 0)
        throw InfeasibleDesign(std::to_string(n) + " rows do not split into " +
                               std::to_string(n_blocks) + " equal blocks");
    const std::size_t capacity = n / n_blocks;

    BlockBalance balance(fraction, n_blocks);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RandomStream rng(seed, std::string_view("blocks"));
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<std::size_t> assignment(n);
    std::vector<std::size_t> fill(n_blocks, 0);
    for (auto row : order) {
        std::size_t chosen = n_blocks;
        std::pair<double, double> chosen_score{};
        for (std::size_t b = 0; b < n_blocks; ++b) {
            if (fill[b] == capacity) continue;
            balance.add(b, row);
            ++fill[b];
            const auto s = balance.partial_score(fill, capacity);
            --fill[b];
            balance.add(b, row, -1.0);
            if (chosen == n_blocks || better(s, chosen_score)) {
                chosen = b;
                chosen_score = s;
            }
        }
        balance.add(chosen, row);
        ++fill[chosen];
        assignment[row] = chosen;
    }

    // Pairwise exchange until no swap improves the balance.
    auto current = balance.score();
    for (bool improved = true; improved;) {
        improved = false;
        for (std::size_t r1 = 0; r1 < n; ++r1) {
            for (std::size_t r2 = r1 + 1; r2 < n; ++r2) {
                const auto b1 = assignment[r1], b2 = assignment[r2];
                if (b1 == b2) continue;
                balance.add(b1, r1, -1.0);
                balance.add(b2, r2, -1.0);
                balance.add(b1, r2);
                balance.add(b2, r1);
                const auto s = balance.score();
                if (better(s, current)) {
                    current = s;
                    assignment[r1] = b2;
                    assignment[r2] = b1;
                    improved = true;
                } else {
                    balance.add(b1, r2, -1.0);
                    balance.add(b2, r1, -1.0);
                    balance.add(b1, r1);
                    balance.add(b2, r2);
                }
            }
        }
    }

    BlockSet out;
    out.blocks.resize(n_blocks);
    for (std::size_t r = 0; r < n; ++r) out.blocks[assignment[r]].push_back(r);
    return out;
}

double max_level_deviation(const DesignTable& fraction, const BlockSet& blocks) {
    BlockBalance balance(fraction, blocks.blocks.size());
    for (std::size_t b = 0; b < blocks.blocks.size(); ++b)
        for (auto r : blocks.blocks[b]) balance.add(b, r);
    return balance.score().first;
}

std::vector<ChoiceTask> to_choice_tasks(const DesignTable& fraction, const BlockSet& blocks) {
    auto column = [&](std::string_view name) {
        for (std::size_t a = 0; a < fraction.attributes.size(); ++a)
            if (fraction.attributes[a].name == name) return a;
        throw ValidationError("design has no attribute named " + std::string(name));
    };
    const auto cs_cost = column("cs_cost"), cs_time = column("cs_time"), cs_co2 = column("cs_co2"),
               cs_flex = column("cs_flex"), cc_cost = column("cc_cost"), cc_time = column("cc_time");
    std::vector<ChoiceTask> tasks;
    for (std::size_t b = 0; b < blocks.blocks.size(); ++b) {
        for (std::size_t t = 0; t < blocks.blocks[b].size(); ++t) {
            const auto& row = fraction.rows[blocks.blocks[b][t]];
            ChoiceTask task{static_cast<int>(b + 1),
                            static_cast<int>(t + 1),
                            row[cs_cost],
                            row[cs_time],
                            static_cast<int>(row[cs_co2]),
                            static_cast<int>(row[cs_flex]),
                            row[cc_cost],
                            row[cc_time]};
            validate_task(task);
            tasks.push_back(task);
        }
    }
    return tasks;
}

long orme_minimum_sample(long max_levels, long tasks, long alternatives) {
    if (max_levels < 1 || tasks < 1 || alternatives < 1)
        throw ValidationError("Orme rule inputs must all be at least 1");
    const long denom = tasks * alternatives;
    return (500 * max_levels + denom - 1) / denom;
}

}  // namespace hcm
