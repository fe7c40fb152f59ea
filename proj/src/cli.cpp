#include "hcm/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "hcm/dataset_io.hpp"
#include "hcm/design.hpp"
#include "hcm/efa.hpp"
#include "hcm/estimator.hpp"
#include "hcm/simulator.hpp"
#include "hcm/stats.hpp"
#include "hcm/survey.hpp"
#include "hcm/survey_http.hpp"

#ifndef HCM_CONTENT_DIR
#define HCM_CONTENT_DIR "content"
#endif

namespace hcm::cli {

namespace fs = std::filesystem;

namespace {

struct DesignArgs {
    std::string attrs;
    std::string out = "design.csv";
    std::size_t k = 54;
    std::size_t blocks = 6;
    std::uint64_t seed = 1;
    int restarts = 10;
};

struct SimulateArgs {
    std::string params;
    std::string design;
    std::string out = "data";
    std::size_t n = 250;
    std::uint64_t seed = 1;
    std::uint64_t design_seed = 1;
};

struct EfaArgs {
    std::string likert;
    std::string out = "efa.json";
    double kaiser = 1.0;
    double cutoff = 0.4;
    std::vector<std::string> exclude;
};

struct EstimateArgs {
    std::string data;
    std::string out = "estimates.json";
    std::string init;
    int draws = 500;
    std::string scheme = "halton";
    std::uint64_t seed = 0;
    double tol = 1e-3;
    int max_iter = 500;
    bool choice_only = false;
};

struct WtpArgs {
    std::string estimates;
    std::string out;
};

struct SummarizeArgs {
    std::string data;
    std::string out = "summary.json";
    std::string csv_dir;
    double speed = 20.0;
};

struct ServeArgs {
    std::string design;
    std::string data_dir = "survey-data";
    std::string host = "127.0.0.1";
    std::string content = std::string(HCM_CONTENT_DIR) + "/statements.en.json";
    int port = 8080;
    int blocks = 0;
};

std::vector<ChoiceTask> default_design(std::uint64_t seed) {
    const auto full = enumerate_full_factorial(default_attributes());
    DOptimalOptions opts;
    opts.seed = seed;
    const auto fraction = select_d_optimal(full, 54, opts).fraction;
    return to_choice_tasks(fraction, partition_blocks(fraction, 6, seed));
}

int cmd_design(const DesignArgs& a, std::ostream& out) {
    const auto attrs = a.attrs.empty() ? default_attributes() : read_attributes(a.attrs);
    const auto full = enumerate_full_factorial(attrs);
    DOptimalOptions opts;
    opts.seed = a.seed;
    opts.restarts = a.restarts;
    const auto d = select_d_optimal(full, a.k, opts);
    const auto blocks = partition_blocks(d.fraction, a.blocks, a.seed);
    write_text_file(a.out, design_csv(to_choice_tasks(d.fraction, blocks)));
    out << "full factorial: " << full.size() << " profiles\n"
        << "fraction: " << d.fraction.size() << " rows in " << a.blocks << " blocks\n"
        << "log det(X'X/k): " << std::setprecision(10) << d.log_det << "\n"
        << "max level deviation per block: " << max_level_deviation(d.fraction, blocks) << "\n"
        << "wrote " << a.out << "\n";
    return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const ParameterSet truth = a.params.empty() ? published_estimates() : read_params(a.params);
    const auto design = a.design.empty() ? default_design(a.design_seed) : read_design(a.design);
    const auto population = synthesize_population(default_population(a.n, a.seed));
    Dataset ds = simulate_dataset(population, design, truth, a.seed);
    fs::create_directories(a.out);
    write_dataset(ds, DatasetPaths::in_directory(a.out));
    write_params(truth, fs::path(a.out) / "truth.json");
    out << "simulated " << ds.respondents.size() << " respondents into " << a.out << "\n";
    return 0;
}

int cmd_efa(const EfaArgs& a, std::ostream& out) {
    const auto rows = read_likert(a.likert);
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kStatements));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < kStatements; ++j)
            scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].scores[j];
    std::vector<std::string> names;
    for (std::size_t j = 0; j < kStatements; ++j) names.push_back(statement_name(j));
    const auto report =
        run_efa(scores, names, a.kaiser, a.cutoff, std::set<std::string>(a.exclude.begin(), a.exclude.end()));
    write_text_file(a.out, efa_json(report));
    out << "retained factors: " << report.unrotated.n_retained << "\n";
    for (std::size_t f = 0; f < report.indicators.size(); ++f) {
        out << "  factor " << f + 1 << ":";
        for (const auto& s : report.indicators[f]) out << " " << s;
        out << "\n";
    }
    out << "wrote " << a.out << "\n";
    return 0;
}

int cmd_estimate(const EstimateArgs& a, unsigned threads, std::ostream& out) {
    const Dataset ds = read_dataset(DatasetPaths::in_directory(a.data));
    EstimationConfig cfg;
    cfg.draws.R = a.draws;
    const auto scheme = parse_scheme(a.scheme);
    if (!scheme) throw ValidationError("unknown draw scheme '" + a.scheme + "' (halton or pseudo)");
    cfg.draws.scheme = *scheme;
    cfg.draws.seed = a.seed;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.threads = threads;
    if (a.choice_only) cfg.model = ModelOptions{false, false};
    const ParameterSet init = a.init.empty() ? default_start_values() : read_params(a.init);

    const auto start = std::chrono::steady_clock::now();
    const auto res = maximize_likelihood(ds, init, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_file(a.out, estimates_json(res));

    out << std::fixed;
    out << "respondents " << ds.respondents.size() << ", draws " << a.draws << " (" << a.scheme << ")\n";
    out << std::setprecision(3) << "LL null " << res.ll_null << ", init " << res.ll_init << ", final "
        << res.ll_final << "\n";
    out << (res.converged ? "converged" : "NOT converged") << " after " << res.iterations << " iterations, "
        << std::setprecision(1) << secs << " s\n";
    out << std::left << std::setw(18) << "parameter" << std::right << std::setw(11) << "value" << std::setw(11)
        << "robust se" << std::setw(9) << "t" << "\n";
    for (auto i : res.free) {
        out << std::left << std::setw(18) << param_name(i) << std::right << std::setprecision(4) << std::setw(11)
            << res.estimates[i] << std::setw(11) << res.robust_se[i] << std::setprecision(2) << std::setw(9)
            << res.robust_t[i] << "\n";
    }
    for (const auto& w : res.warnings) out << "warning: " << w << "\n";
    out << "wrote " << a.out << "\n";
    return 0;
}

int cmd_wtp(const WtpArgs& a, std::ostream& out) {
    const ParameterSet p = read_params(a.estimates);
    const double cs = compute_wtp(p, Channel::CS), cc = compute_wtp(p, Channel::CC);
    if (!a.out.empty()) write_text_file(a.out, wtp_json(p));
    out << std::fixed << std::setprecision(2) << "CS " << cs << "\nCC " << cc << "\n";
    return 0;
}

int cmd_summarize(const SummarizeArgs& a, std::ostream& out) {
    const Dataset ds = read_dataset(DatasetPaths::in_directory(a.data));
    const Summary s = summarize(ds, a.speed);
    write_text_file(a.out, summary_json(s));
    if (!a.csv_dir.empty()) {
        fs::create_directories(a.csv_dir);
        for (const auto& [name, text] : summary_csv(s)) write_text_file(fs::path(a.csv_dir) / name, text);
    }
    out << summary_text(s) << "wrote " << a.out << "\n";
    return 0;
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    SurveyConfig cfg;
    if (!a.design.empty()) cfg.design = read_design(a.design);
    cfg.n_blocks = a.blocks;
    cfg.data_dir = a.data_dir;
    if (fs::exists(a.content)) cfg.content_file = a.content;
    SurveyService service(std::move(cfg));
    SurveyHttpServer server(service);

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    const int port = server.bind(a.host, a.port);
    out << "serving on http://" << a.host << ":" << port << " ("
        << (service.ready() ? std::to_string(service.n_blocks()) + " blocks" : std::string("no design loaded"))
        << ", " << service.response_count() << " stored responses)" << std::endl;
    std::thread worker([&server] { server.listen(); });
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    worker.join();
    out << "stopped" << std::endl;
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hybrid choice model toolkit for crowd-shipping stated-preference studies", "hcm"};
    app.require_subcommand(1);
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads for likelihood evaluation")
        ->check(CLI::Range(1u, 256u));

    DesignArgs da;
    auto* design = app.add_subcommand("design", "Generate a blocked D-optimal fraction");
    design->add_option("--attrs", da.attrs, "Attribute specification (attrs.json); default levels if omitted");
    design->add_option("--k", da.k, "Fraction size")->check(CLI::PositiveNumber);
    design->add_option("--blocks", da.blocks, "Number of blocks")->check(CLI::PositiveNumber);
    design->add_option("--seed", da.seed, "Random seed");
    design->add_option("--restarts", da.restarts, "Exchange restarts")->check(CLI::PositiveNumber);
    design->add_option("--out,-o", da.out, "Output design.csv");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Simulate a dataset bundle from known parameters");
    simulate->add_option("--params", sa.params, "Generating parameters (truth.json); published values if omitted");
    simulate->add_option("--design", sa.design, "design.csv; a default 54/6 design if omitted");
    simulate->add_option("--design-seed", sa.design_seed, "Seed of the default design");
    simulate->add_option("--n", sa.n, "Respondents");
    simulate->add_option("--seed", sa.seed, "Random seed");
    simulate->add_option("--out,-o", sa.out, "Output directory");

    EfaArgs ea;
    auto* efa = app.add_subcommand("efa", "Exploratory factor analysis of likert.csv");
    efa->add_option("likert", ea.likert, "likert.csv")->required();
    efa->add_option("--out,-o", ea.out, "Output efa.json");
    efa->add_option("--kaiser", ea.kaiser, "Eigenvalue threshold");
    efa->add_option("--cutoff", ea.cutoff, "Loading cutoff");
    efa->add_option("--exclude", ea.exclude, "Statements left out of the indicator lists")->delimiter(',');

    EstimateArgs ma;
    auto* estimate = app.add_subcommand("estimate", "Maximum simulated likelihood estimation");
    estimate->add_option("data", ma.data, "Dataset directory")->required();
    estimate->add_option("--out,-o", ma.out, "Output estimates.json");
    estimate->add_option("--draws", ma.draws, "Draws per respondent")->check(CLI::PositiveNumber);
    estimate->add_option("--scheme", ma.scheme, "halton or pseudo")->check(CLI::IsMember({"halton", "pseudo"}));
    estimate->add_option("--seed", ma.seed, "Draw seed");
    estimate->add_option("--init", ma.init, "Starting values (parameter JSON)");
    estimate->add_option("--tol", ma.tol, "Gradient tolerance")->check(CLI::PositiveNumber);
    estimate->add_option("--max-iter", ma.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
    estimate->add_flag("--choice-only", ma.choice_only, "Drop the latent variable and its equations");

    WtpArgs wa;
    auto* wtp = app.add_subcommand("wtp", "Willingness to pay for time savings");
    wtp->add_option("estimates", wa.estimates, "estimates.json or parameter JSON")->required();
    wtp->add_option("--out,-o", wa.out, "Output wtp.json");

    SummarizeArgs ya;
    auto* summ = app.add_subcommand("summarize", "Descriptive statistics of a dataset");
    summ->add_option("data", ya.data, "Dataset directory")->required();
    summ->add_option("--out,-o", ya.out, "Output summary.json");
    summ->add_option("--csv-dir", ya.csv_dir, "Also write one CSV per table here");
    summ->add_option("--speed", ya.speed, "Speed for the detour distance, km/h")->check(CLI::PositiveNumber);

    ServeArgs va;
    auto* serve = app.add_subcommand("serve", "Run the survey HTTP service");
    serve->add_option("--design", va.design, "design.csv");
    serve->add_option("--port", va.port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", va.host, "Bind address");
    serve->add_option("--data-dir", va.data_dir, "Directory for the response logs");
    serve->add_option("--blocks", va.blocks, "Expected number of blocks");
    serve->add_option("--content", va.content, "Statement texts JSON");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = nullptr;
        for (auto* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return 2;
    }

    try {
        if (*design) return cmd_design(da, out);
        if (*simulate) return cmd_simulate(sa, out);
        if (*efa) return cmd_efa(ea, out);
        if (*estimate) return cmd_estimate(ma, threads, out);
        if (*wtp) return cmd_wtp(wa, out);
        if (*summ) return cmd_summarize(ya, out);
        if (*serve) return cmd_serve(va, out);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg)
            if (c == '\n') c = ' ';
        err << "error: " << msg << "\n";
        return 1;
    }
    return 2;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace hcm::cli
