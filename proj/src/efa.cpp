#include "hcm/efa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace hcm {

Eigen::MatrixXd pearson_correlation(const Eigen::MatrixXd& scores,
                                    const std::vector<std::string>& names) {
    const Eigen::Index n = scores.rows(), w = scores.cols();
    if (n < 2) throw DegenerateInput("correlation needs at least 2 observations");
    const Eigen::RowVectorXd mean = scores.colwise().mean();
    const Eigen::MatrixXd centered = scores.rowwise() - mean;
    const Eigen::VectorXd ss = centered.colwise().squaredNorm();
    for (Eigen::Index j = 0; j < w; ++j) {
        if (!(ss[j] > 0.0)) {
            const std::string label = static_cast<std::size_t>(j) < names.size()
                                          ? names[static_cast<std::size_t>(j)]
                                          : "column " + std::to_string(j + 1);
            throw DegenerateInput("constant column: " + label);
        }
    }
    const Eigen::VectorXd inv = ss.array().sqrt().inverse();
    Eigen::MatrixXd corr = inv.asDiagonal() * (centered.transpose() * centered) * inv.asDiagonal();
    for (Eigen::Index i = 0; i < w; ++i) {
        corr(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = std::clamp(0.5 * (corr(i, j) + corr(j, i)), -1.0, 1.0);
            corr(i, j) = corr(j, i) = v;
        }
    }
    return corr;
}

FactorSolution extract_principal_factors(const Eigen::MatrixXd& corr, double kaiser_threshold) {
    const Eigen::Index w = corr.rows();
    if (w == 0 || corr.cols() != w) throw DegenerateInput("correlation matrix must be square");
    if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw DegenerateInput("correlation matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) throw DegenerateInput("eigendecomposition failed");
    const Eigen::VectorXd values = eig.eigenvalues();  // ascending
    if (values.minCoeff() < -1e-8) throw DegenerateInput("correlation matrix is not positive semidefinite");

    FactorSolution sol;
    for (Eigen::Index i = w; i-- > 0;) sol.eigenvalues.push_back(values[i]);
    // Exact 1.0 stays in; eigen-solver rounding on an identity must not drop it.
    const double cut = kaiser_threshold - 1e-12;
    sol.n_retained = static_cast<std::size_t>(
        std::count_if(sol.eigenvalues.begin(), sol.eigenvalues.end(), [cut](double v) { return v >= cut; }));

    const auto f = static_cast<Eigen::Index>(sol.n_retained);
    sol.loadings.resize(w, f);
    for (Eigen::Index j = 0; j < f; ++j) {
        Eigen::VectorXd v = eig.eigenvectors().col(w - 1 - j);
        if (v.sum() < 0.0) v = -v;
        sol.loadings.col(j) = v * std::sqrt(std::max(0.0, values[w - 1 - j]));
    }
    sol.communalities.resize(static_cast<std::size_t>(w));
    for (Eigen::Index i = 0; i < w; ++i)
        sol.communalities[static_cast<std::size_t>(i)] = sol.loadings.row(i).squaredNorm();
    return sol;
}

double varimax_criterion(const Eigen::MatrixXd& L) {
    const double p = static_cast<double>(L.rows());
    double total = 0.0;
    for (Eigen::Index j = 0; j < L.cols(); ++j) {
        const Eigen::ArrayXd sq = L.col(j).array().square();
        const double m = sq.sum() / p;
        total += sq.square().sum() / p - m * m;
    }
    return total;
}

VarimaxResult rotate_varimax(const Eigen::MatrixXd& loadings, double tol, int max_iter) {
    const Eigen::Index p = loadings.rows(), f = loadings.cols();
    if (f < 1) throw DegenerateInput("varimax needs at least one factor");

    VarimaxResult res;
    res.rotation = Eigen::MatrixXd::Identity(f, f);
    if (f == 1) {
        res.loadings = loadings;
        res.criterion_trace = {varimax_criterion(loadings)};
        return res;
    }

    Eigen::VectorXd h = loadings.rowwise().norm();
    for (Eigen::Index i = 0; i < p; ++i)
        if (!(h[i] > 0.0)) h[i] = 1.0;
    const Eigen::MatrixXd x = h.cwiseInverse().asDiagonal() * loadings;

    Eigen::MatrixXd T = Eigen::MatrixXd::Identity(f, f);
    double d = 0.0;
    res.criterion_trace.push_back(varimax_criterion(x));
    res.converged = false;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd z = x * T;
        const Eigen::RowVectorXd colss = z.array().square().colwise().sum();
        const Eigen::MatrixXd target =
            z.array().cube().matrix() - z * (colss / static_cast<double>(p)).asDiagonal();
        const Eigen::MatrixXd B = x.transpose() * target;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
        T = svd.matrixU() * svd.matrixV().transpose();
        const double d_past = d;
        d = svd.singularValues().sum();
        res.criterion_trace.push_back(varimax_criterion(x * T));
        res.iterations = it + 1;
        if (d < d_past * (1.0 + tol)) {
            res.converged = true;
            break;
        }
    }

    Eigen::MatrixXd rotated = h.asDiagonal() * (x * T);
    for (Eigen::Index j = 0; j < f; ++j) {
        if (rotated.col(j).sum() < 0.0) {
            rotated.col(j) *= -1.0;
            T.col(j) *= -1.0;
        }
    }
    res.loadings = std::move(rotated);
    res.rotation = std::move(T);
    return res;
}

LoadingTable prune_loadings(const Eigen::MatrixXd& rotated, const std::vector<std::string>& statements,
                            double cutoff) {
    LoadingTable t;
    t.statements = statements;
    t.statements.resize(static_cast<std::size_t>(rotated.rows()));
    for (std::size_t i = statements.size(); i < t.statements.size(); ++i)
        t.statements[i] = statement_name(i);
    for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
        std::vector<std::optional<double>> row;
        for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
            const double v = rotated(i, j);
            if (std::abs(v) < cutoff) {
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(v);
            }
        }
        t.cells.push_back(std::move(row));
    }
    return t;
}

std::vector<std::string> indicators_for_factor(const LoadingTable& table, std::size_t factor_id,
                                               const std::set<std::string>& excluded) {
    if (factor_id < 1 || factor_id > table.n_factors())
        throw ValidationError("unknown factor " + std::to_string(factor_id));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < table.cells.size(); ++i) {
        if (table.cells[i][factor_id - 1] && !excluded.count(table.statements[i]))
            out.push_back(table.statements[i]);
    }
    return out;
}

double tucker_congruence(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double denom = std::sqrt(a.squaredNorm() * b.squaredNorm());
    return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

std::vector<double> matched_congruence(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    const auto f = static_cast<std::size_t>(truth.cols());
    std::vector<std::size_t> perm(f);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> best;
    double best_total = -1.0;
    do {
        std::vector<double> cong(f);
        double total = 0.0;
        for (std::size_t j = 0; j < f; ++j) {
            cong[j] = std::abs(tucker_congruence(estimate.col(static_cast<Eigen::Index>(perm[j])),
                                                 truth.col(static_cast<Eigen::Index>(j))));
            total += cong[j];
        }
        if (total > best_total) {
            best_total = total;
            best = cong;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

EfaReport run_efa(const Eigen::MatrixXd& scores, const std::vector<std::string>& statements,
                  double kaiser_threshold, double cutoff, const std::set<std::string>& excluded) {
    EfaReport r;
    r.unrotated = extract_principal_factors(pearson_correlation(scores, statements), kaiser_threshold);
    if (r.unrotated.n_retained == 0) throw DegenerateInput("no factor passes the Kaiser criterion");
    r.rotated = rotate_varimax(r.unrotated.loadings);
    r.pruned = prune_loadings(r.rotated.loadings, statements, cutoff);
    for (std::size_t f = 1; f <= r.pruned.n_factors(); ++f)
        r.indicators.push_back(indicators_for_factor(r.pruned, f, excluded));
    return r;
}

std::string efa_json(const EfaReport& r) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["eigenvalues"] = r.unrotated.eigenvalues;
    j["n_retained"] = r.unrotated.n_retained;
    j["rotation_converged"] = r.rotated.converged;
    ojson loadings = ojson::object(), pruned = ojson::object(), comm = ojson::object();
    for (std::size_t i = 0; i < r.pruned.statements.size(); ++i) {
        const auto& name = r.pruned.statements[i];
        std::vector<double> row;
        ojson prow = ojson::array();
        for (Eigen::Index f = 0; f < r.rotated.loadings.cols(); ++f) {
            row.push_back(r.rotated.loadings(static_cast<Eigen::Index>(i), f));
            const auto& cell = r.pruned.cells[i][static_cast<std::size_t>(f)];
            prow.push_back(cell ? ojson(*cell) : ojson(nullptr));
        }
        loadings[name] = row;
        pruned[name] = prow;
        comm[name] = r.unrotated.communalities[i];
    }
    j["rotated_loadings"] = loadings;
    j["pruned_loadings"] = pruned;
    j["communalities"] = comm;
    ojson ind = ojson::object();
    for (std::size_t f = 0; f < r.indicators.size(); ++f) ind[std::to_string(f + 1)] = r.indicators[f];
    j["indicators"] = ind;
    return j.dump(2) + "\n";
}

}  // namespace hcm
