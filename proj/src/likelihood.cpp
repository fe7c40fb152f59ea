#include "hcm/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "hcm/normal.hpp"

namespace hcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Floor for a single ordered-response probability so that the log stays
// finite far out in the tails.
constexpr double kProbFloor = 1e-300;

// d tau_i / d Delta_1 and d tau_i / d Delta_2.
constexpr std::array<double, 4> kTauDelta1 = {-1.0, -1.0, 1.0, 1.0};
constexpr std::array<double, 4> kTauDelta2 = {-1.0, 0.0, 0.0, 1.0};

struct IndicatorTerm {
    double log_p = 0.0;
    double d_mean = 0.0;
    double d_sigma = 0.0;
    double d_delta1 = 0.0;
    double d_delta2 = 0.0;
};

IndicatorTerm indicator_term(int score, double mean, double sigma, const ThresholdVector& th,
                             bool gradient) {
    const double lo = score == 1 ? -kInf : th.tau[static_cast<std::size_t>(score - 2)];
    const double hi = score == 5 ? kInf : th.tau[static_cast<std::size_t>(score - 1)];
    const double a_lo = (lo - mean) / sigma;
    const double a_hi = (hi - mean) / sigma;
    double p = a_lo > 0.0 ? norm_sf(a_lo) - norm_sf(a_hi) : norm_cdf(a_hi) - norm_cdf(a_lo);
    p = std::max(p, kProbFloor);

    IndicatorTerm t;
    t.log_p = std::log(p);
    if (!gradient) return t;

    const bool has_lo = score > 1, has_hi = score < 5;
    const double phi_lo = has_lo ? norm_pdf(a_lo) : 0.0;
    const double phi_hi = has_hi ? norm_pdf(a_hi) : 0.0;
    const double inv = 1.0 / (sigma * p);
    t.d_mean = (phi_lo - phi_hi) * inv;
    t.d_sigma = ((has_lo ? a_lo * phi_lo : 0.0) - (has_hi ? a_hi * phi_hi : 0.0)) * inv;
    if (has_hi) {
        t.d_delta1 += phi_hi * inv * kTauDelta1[static_cast<std::size_t>(score - 1)];
        t.d_delta2 += phi_hi * inv * kTauDelta2[static_cast<std::size_t>(score - 1)];
    }
    if (has_lo) {
        t.d_delta1 -= phi_lo * inv * kTauDelta1[static_cast<std::size_t>(score - 2)];
        t.d_delta2 -= phi_lo * inv * kTauDelta2[static_cast<std::size_t>(score - 2)];
    }
    return t;
}

double log_sum_exp(std::span<const double> v) {
    double mx = -kInf;
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

ThresholdVector ThresholdVector::from_deltas(double d1, double d2) {
    return {{-d1 - d2, -d1, d1, d1 + d2}};
}

double structural_value(std::span<const double, kStructuralCovariates> x, const ParameterSet& p,
                        double eps) {
    double v = p[Param::Beta0S];
    for (std::size_t k = 0; k < kStructuralCovariates; ++k) v += p[structural_beta_index(k)] * x[k];
    return v + p[Param::SigmaS] * eps;
}

double structural_value(const RespondentRecord& record, const ParameterSet& p, double eps) {
    const auto x = structural_covariates(record);
    return structural_value(std::span<const double, kStructuralCovariates>(x), p, eps);
}

std::array<double, 5> ordered_indicator_prob(double lv, double beta0, double beta, double sigma_star,
                                             const ThresholdVector& th) {
    const double m = beta0 + beta * lv;
    std::array<double, 5> cdf{};
    for (std::size_t j = 0; j < 4; ++j) cdf[j] = norm_cdf((th.tau[j] - m) / sigma_star);
    cdf[4] = 1.0;
    std::array<double, 5> p{};
    double prev = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        p[j] = cdf[j] - prev;
        prev = cdf[j];
    }
    return p;
}

Utilities task_utilities(const ChoiceTask& task, const RespondentRecord& record, double lv,
                         double alpha_draw, const ParameterSet& p) {
    const ScaledFeatures f = scale_covariates(record, task);
    Utilities u;
    u.cs = p[Param::AscCs] + p[Param::BetaCostCs] * f.cs_cost + p[Param::BetaTimeCs] * f.cs_time +
           p[Param::BetaCo2] * f.co2_income + p[Param::BetaFlex] * f.flex_income +
           p[Param::BetaLv] * lv + p[Param::SigmaAlpha] * alpha_draw;
    u.cc = p[Param::BetaCostCc] * f.cc_cost + p[Param::BetaTimeCc] * f.cc_time;
    u.store = p[Param::AscStore] + p[Param::BetaChildren] * f.n_children;
    return u;
}

double logit_choice_prob(const Utilities& u, Choice chosen) {
    const double mx = std::max({u.cs, u.cc, u.store});
    const double denom = std::exp(u.cs - mx) + std::exp(u.cc - mx) + std::exp(u.store - mx);
    return std::exp(u[chosen] - mx) / denom;
}

namespace {

// Log of the product of kernel and indicator probabilities at one draw,
// built from the public single-observation functions.
double draw_log_product(const RespondentRecord& record, const std::vector<ChoiceTask>& block,
                        const ParameterSet& p, double eps, double alpha, const ModelOptions& opt) {
    if (block.size() != record.choices.size())
        throw ValidationError("respondent " + record.id + ": block size does not match choices");
    const double lv = structural_value(record, p, eps);
    double l = 0.0;
    for (std::size_t t = 0; t < block.size(); ++t)
        l += std::log(logit_choice_prob(task_utilities(block[t], record, lv, alpha, p), record.choices[t]));
    if (opt.measurement) {
        const auto th = ThresholdVector::from_deltas(p[Param::Delta1], p[Param::Delta2]);
        for (std::size_t k = 0; k < kMeasured; ++k) {
            const auto probs = ordered_indicator_prob(lv, p[beta0_index(k)], p[loading_index(k)],
                                                      p[sigma_star_index(k)], th);
            l += std::log(probs[static_cast<std::size_t>(record.likert[kMeasuredStatements[k]] - 1)]);
        }
        if (opt.anchor) {
            const auto probs = ordered_indicator_prob(lv, kAnchorIntercept, kAnchorLoading, kAnchorSigma, th);
            l += std::log(probs[static_cast<std::size_t>(record.likert[kAnchorStatement] - 1)]);
        }
    }
    return l;
}

}  // namespace

double simulated_respondent_prob(const RespondentRecord& record, const std::vector<ChoiceTask>& block,
                                 const ParameterSet& p, std::span<const double> draws,
                                 const ModelOptions& opt) {
    const std::size_t R = draws.size() / 2;
    if (R == 0) throw ValidationError("at least one draw is required");
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r)
        sum += std::exp(draw_log_product(record, block, p, draws[2 * r], draws[2 * r + 1], opt));
    return sum / static_cast<double>(R);
}

double log_simulated_respondent_prob(const RespondentRecord& record,
                                     const std::vector<ChoiceTask>& block, const ParameterSet& p,
                                     std::span<const double> draws, const ModelOptions& opt) {
    const std::size_t R = draws.size() / 2;
    if (R == 0) throw ValidationError("at least one draw is required");
    std::vector<double> logs(R);
    for (std::size_t r = 0; r < R; ++r)
        logs[r] = draw_log_product(record, block, p, draws[2 * r], draws[2 * r + 1], opt);
    return log_sum_exp(logs) - std::log(static_cast<double>(R));
}

Panel Panel::build(const Dataset& dataset) {
    std::map<int, std::vector<ChoiceTask>> blocks;
    for (const auto& r : dataset.respondents)
        if (!blocks.count(r.block_id)) blocks[r.block_id] = dataset.block_tasks(r.block_id);

    Panel panel;
    panel.respondents.reserve(dataset.respondents.size());
    for (const auto& r : dataset.respondents) {
        const auto& block = blocks[r.block_id];
        if (block.size() != r.choices.size())
            throw ValidationError("respondent " + r.id + ": " + std::to_string(r.choices.size()) +
                                  " choices for a block of " + std::to_string(block.size()));
        PanelRespondent pr;
        pr.id = r.id;
        pr.covariates = structural_covariates(r);
        pr.n_children = r.n_children;
        for (std::size_t t = 0; t < block.size(); ++t) {
            const auto f = scale_covariates(r, block[t]);
            pr.tasks.push_back({f.cs_cost, f.cs_time, f.co2_income, f.flex_income, f.cc_cost, f.cc_time,
                                r.choices[t]});
        }
        for (std::size_t k = 0; k < kMeasured; ++k) pr.scores[k] = r.likert[kMeasuredStatements[k]];
        pr.scores[kMeasured] = r.likert[kAnchorStatement];
        for (int s : pr.scores)
            if (s < 1 || s > 5) throw ValidationError("respondent " + r.id + ": Likert score outside 1..5");
        panel.respondents.push_back(std::move(pr));
    }
    std::sort(panel.respondents.begin(), panel.respondents.end(),
              [](const PanelRespondent& a, const PanelRespondent& b) { return a.id < b.id; });
    return panel;
}

std::vector<std::string> Panel::ids() const {
    std::vector<std::string> out;
    out.reserve(respondents.size());
    for (const auto& r : respondents) out.push_back(r.id);
    return out;
}

std::size_t Panel::n_observations() const {
    std::size_t n = 0;
    for (const auto& r : respondents) n += r.tasks.size();
    return n;
}

double respondent_log_prob(const PanelRespondent& resp, std::span<const double> draws,
                           const ParameterSet& p, const ModelOptions& opt, std::span<double> gradient) {
    const bool want_grad = !gradient.empty();
    const int R = static_cast<int>(draws.size() / 2);
    if (R < 1) throw ValidationError("at least one draw is required");
    if (want_grad && gradient.size() != kNumParams)
        throw ValidationError("gradient buffer must hold every parameter");

    double xb = p[Param::Beta0S];
    for (std::size_t k = 0; k < kStructuralCovariates; ++k)
        xb += p[structural_beta_index(k)] * resp.covariates[k];
    const double sigma_s = p[Param::SigmaS];
    const double beta_lv = p[Param::BetaLv];
    const double sigma_alpha = p[Param::SigmaAlpha];

    // Draw-independent pieces of each task: the CS utility without the
    // latent and agent terms, and the CC / store alternatives shifted by
    // their max so the per-draw work is one exp and one log.
    const std::size_t T = resp.tasks.size();
    struct TaskConst {
        double v_cs, shift, log_cc, log_st, e_cc, e_st;
    };
    std::vector<TaskConst> tc(T);
    const double v_st = p[Param::AscStore] + p[Param::BetaChildren] * resp.n_children;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& k = resp.tasks[t];
        const double v_cs = p[Param::AscCs] + p[Param::BetaCostCs] * k.cs_cost +
                            p[Param::BetaTimeCs] * k.cs_time + p[Param::BetaCo2] * k.co2_income +
                            p[Param::BetaFlex] * k.flex_income;
        const double v_cc = p[Param::BetaCostCc] * k.cc_cost + p[Param::BetaTimeCc] * k.cc_time;
        const double c = std::max(v_cc, v_st);
        tc[t] = {v_cs, c, v_cc - c, v_st - c, std::exp(v_cc - c), std::exp(v_st - c)};
    }

    const auto th = ThresholdVector::from_deltas(p[Param::Delta1], p[Param::Delta2]);

    double running_max = -kInf, weight_sum = 0.0;
    std::array<double, kNumParams> acc{};
    std::array<double, kNumParams> g{};

    for (int r = 0; r < R; ++r) {
        const double eps = draws[2 * static_cast<std::size_t>(r)];
        const double alpha = draws[2 * static_cast<std::size_t>(r) + 1];
        const double lv = xb + sigma_s * eps;
        const double lv_terms = beta_lv * lv + sigma_alpha * alpha;

        double l = 0.0;
        double e_cs = 0.0, e_st = 0.0;
        std::array<double, 4> e_cs_x{};
        std::array<double, 2> e_cc_x{};
        for (std::size_t t = 0; t < T; ++t) {
            const auto& c = tc[t];
            const double d = c.v_cs + lv_terms - c.shift;
            double p_cs, p_cc, p_st, log_num_cs, log_num_cc, log_num_st, log_den;
            if (d > 0.0) {
                const double em = std::exp(-d);
                const double den = 1.0 + (c.e_cc + c.e_st) * em;
                log_den = std::log(den);
                p_cs = 1.0 / den;
                p_cc = c.e_cc * em / den;
                p_st = c.e_st * em / den;
                log_num_cs = 0.0;
                log_num_cc = c.log_cc - d;
                log_num_st = c.log_st - d;
            } else {
                const double ed = std::exp(d);
                const double den = ed + c.e_cc + c.e_st;
                log_den = std::log(den);
                p_cs = ed / den;
                p_cc = c.e_cc / den;
                p_st = c.e_st / den;
                log_num_cs = d;
                log_num_cc = c.log_cc;
                log_num_st = c.log_st;
            }
            const Choice ch = resp.tasks[t].chosen;
            l += (ch == Choice::CS ? log_num_cs : ch == Choice::CC ? log_num_cc : log_num_st) - log_den;
            if (want_grad) {
                const auto& k = resp.tasks[t];
                const double rcs = (ch == Choice::CS ? 1.0 : 0.0) - p_cs;
                const double rcc = (ch == Choice::CC ? 1.0 : 0.0) - p_cc;
                const double rst = (ch == Choice::Store ? 1.0 : 0.0) - p_st;
                e_cs += rcs;
                e_st += rst;
                e_cs_x[0] += rcs * k.cs_cost;
                e_cs_x[1] += rcs * k.cs_time;
                e_cs_x[2] += rcs * k.co2_income;
                e_cs_x[3] += rcs * k.flex_income;
                e_cc_x[0] += rcc * k.cc_cost;
                e_cc_x[1] += rcc * k.cc_time;
            }
        }

        double d_lv = beta_lv * e_cs;
        double d_delta1 = 0.0, d_delta2 = 0.0;
        if (opt.measurement) {
            for (std::size_t k = 0; k < kMeasured; ++k) {
                const double loading = p[loading_index(k)];
                const auto term = indicator_term(resp.scores[k], p[beta0_index(k)] + loading * lv,
                                                 p[sigma_star_index(k)], th, want_grad);
                l += term.log_p;
                if (want_grad) {
                    g[beta0_index(k)] = term.d_mean;
                    g[loading_index(k)] = term.d_mean * lv;
                    g[sigma_star_index(k)] = term.d_sigma;
                    d_lv += term.d_mean * loading;
                    d_delta1 += term.d_delta1;
                    d_delta2 += term.d_delta2;
                }
            }
            if (opt.anchor) {
                const auto term = indicator_term(resp.scores[kMeasured],
                                                 kAnchorIntercept + kAnchorLoading * lv, kAnchorSigma,
                                                 th, want_grad);
                l += term.log_p;
                if (want_grad) {
                    d_lv += term.d_mean * kAnchorLoading;
                    d_delta1 += term.d_delta1;
                    d_delta2 += term.d_delta2;
                }
            }
        }

        if (want_grad) {
            g[idx(Param::AscCs)] = e_cs;
            g[idx(Param::AscStore)] = e_st;
            g[idx(Param::BetaChildren)] = e_st * resp.n_children;
            g[idx(Param::BetaCostCs)] = e_cs_x[0];
            g[idx(Param::BetaTimeCs)] = e_cs_x[1];
            g[idx(Param::BetaCo2)] = e_cs_x[2];
            g[idx(Param::BetaFlex)] = e_cs_x[3];
            g[idx(Param::BetaCostCc)] = e_cc_x[0];
            g[idx(Param::BetaTimeCc)] = e_cc_x[1];
            g[idx(Param::BetaLv)] = e_cs * lv;
            g[idx(Param::SigmaAlpha)] = e_cs * alpha;
            g[idx(Param::Delta1)] = d_delta1;
            g[idx(Param::Delta2)] = d_delta2;
            g[idx(Param::Beta0S)] = d_lv;
            for (std::size_t k = 0; k < kStructuralCovariates; ++k)
                g[structural_beta_index(k)] = d_lv * resp.covariates[k];
            g[idx(Param::SigmaS)] = d_lv * eps;
        }

        // Streaming log-sum-exp over draws, rescaling when the max moves.
        if (l > running_max) {
            const double scale = std::isfinite(running_max) ? std::exp(running_max - l) : 0.0;
            weight_sum = weight_sum * scale + 1.0;
            if (want_grad)
                for (std::size_t i = 0; i < kNumParams; ++i) acc[i] = acc[i] * scale + g[i];
            running_max = l;
        } else {
            const double w = std::exp(l - running_max);
            weight_sum += w;
            if (want_grad)
                for (std::size_t i = 0; i < kNumParams; ++i) acc[i] += w * g[i];
        }
    }

    if (want_grad)
        for (std::size_t i = 0; i < kNumParams; ++i) gradient[i] = acc[i] / weight_sum;
    return running_max + std::log(weight_sum) - std::log(static_cast<double>(R));
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

LikelihoodValue evaluate_likelihood(const Panel& panel, const DrawMatrix& draws, const ParameterSet& p,
                                    const ModelOptions& opt, bool with_gradient, unsigned threads) {
    const std::size_t n = panel.respondents.size();
    if (draws.n_respondents() != n)
        throw ValidationError("draw matrix has " + std::to_string(draws.n_respondents()) +
                              " respondents, panel has " + std::to_string(n));
    LikelihoodValue out;
    out.respondent_ll.assign(n, 0.0);
    if (with_gradient) out.scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), kNumParams);

    auto work = [&](std::size_t begin, std::size_t end) {
        std::array<double, kNumParams> grad{};
        for (std::size_t q = begin; q < end; ++q) {
            out.respondent_ll[q] = respondent_log_prob(
                panel.respondents[q], draws.respondent(q), p, opt,
                with_gradient ? std::span<double>(grad) : std::span<double>());
            if (with_gradient)
                for (std::size_t i = 0; i < kNumParams; ++i)
                    out.scores(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) = grad[i];
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
    if (workers == 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk, e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }

    out.log_likelihood = pairwise_sum(out.respondent_ll);
    if (with_gradient) {
        out.gradient = Eigen::VectorXd::Zero(kNumParams);
        std::vector<double> column(n);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(kNumParams); ++i) {
            for (std::size_t q = 0; q < n; ++q) column[q] = out.scores(static_cast<Eigen::Index>(q), i);
            out.gradient[i] = pairwise_sum(column);
        }
    }
    return out;
}

double total_log_likelihood(const Dataset& dataset, const ParameterSet& params, const DrawConfig& draws,
                            const ModelOptions& options, unsigned threads) {
    const Panel panel = Panel::build(dataset);
    const DrawMatrix matrix = generate_draws(draws, panel.ids());
    return evaluate_likelihood(panel, matrix, params, options, false, threads).log_likelihood;
}

double null_log_likelihood(const Panel& panel, const ModelOptions& options) {
    const double choices = static_cast<double>(panel.n_observations()) * std::log(1.0 / 3.0);
    const double indicators = static_cast<double>(panel.respondents.size() * options.n_indicators()) *
                              std::log(1.0 / 5.0);
    return choices + indicators;
}

}  // namespace hcm
