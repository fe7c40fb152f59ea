#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "hcm/cli.hpp"
#include "hcm/dataset_io.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace hcm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Exit status of the installed binary with output discarded.
int run_binary(const std::string& args) {
    const std::string cmd = std::string(HCM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t data_rows(const fs::path& csv) {
    const auto text = read_text_file(csv);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("usage errors and help") {
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"design", "--no-such-flag"}).code == 2);
    CHECK(run_cli({"estimate"}).code == 2);  // missing positional
    CHECK(run_cli({"estimate", "x", "--scheme", "sobol"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
    for (const char* sub : {"design", "simulate", "efa", "estimate", "wtp", "summarize", "serve"}) {
        const auto o = run_cli({sub, "--help"});
        CHECK(o.code == 0);
        CHECK(o.out.find(sub) != std::string::npos);
    }
    CHECK(run_binary("frobnicate") == 2);
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("wtp --help") == 0);
}

TEST_CASE("domain errors exit 1 with a one-line diagnostic") {
    const auto dir = test::temp_dir("cli_err");
    const auto o = run_cli({"estimate", (dir / "missing").string()});
    CHECK(o.code == 1);
    CHECK(o.err.rfind("error: ", 0) == 0);
    CHECK(std::count(o.err.begin(), o.err.end(), '\n') == 1);
    CHECK(run_cli({"design", "--k", "12", "--out", (dir / "d.csv").string()}).code == 1);
    write_text_file(dir / "bad.json", "{\"parameters\": 3}");
    CHECK(run_cli({"wtp", (dir / "bad.json").string()}).code == 1);
    CHECK(run_binary("efa " + (dir / "nothing.csv").string()) == 1);
}

TEST_CASE("wtp at the published estimates") {
    const auto dir = test::temp_dir("cli_wtp");
    write_params(published_estimates(), dir / "published.json");
    const auto o = run_cli({"wtp", (dir / "published.json").string(), "--out", (dir / "wtp.json").string()});
    CHECK(o.code == 0);
    CHECK(o.out == "CS 7.38\nCC 2.04\n");
    const auto j = nlohmann::json::parse(read_text_file(dir / "wtp.json"));
    CHECK(j["CS"].get<double>() == doctest::Approx(7.3846).epsilon(1e-4));
    CHECK(run_binary("wtp " + (dir / "published.json").string()) == 0);
}

TEST_CASE("pipeline: design, simulate, efa, estimate, wtp, summarize") {
    const auto base = test::temp_dir("cli_pipe");
    for (const char* run : {"a", "b"}) {
        const auto dir = base / run;
        fs::create_directories(dir);
        const auto design = (dir / "design.csv").string();
        REQUIRE(run_cli({"design", "--k", "54", "--blocks", "6", "--seed", "3", "--out", design}).code == 0);
        const auto tasks = read_design(design);
        CHECK(tasks.size() == 54);
        std::set<int> blocks;
        for (const auto& t : tasks) blocks.insert(t.block_id);
        CHECK(blocks.size() == 6);

        const auto data = (dir / "data").string();
        REQUIRE(run_cli({"simulate", "--design", design, "--n", "60", "--seed", "8", "--out", data}).code == 0);
        CHECK(data_rows(dir / "data" / "respondents.csv") == 60);
        CHECK(data_rows(dir / "data" / "choices.csv") == 540);
        CHECK(read_params(dir / "data" / "truth.json") == published_estimates());

        const auto efa = run_cli({"efa", (dir / "data" / "likert.csv").string(), "--out",
                                  (dir / "efa.json").string(), "--exclude", "F2,F13"});
        REQUIRE(efa.code == 0);
        CHECK(efa.out.find("retained factors") != std::string::npos);

        const auto est = run_cli({"--threads", "2", "estimate", data, "--draws", "20", "--seed", "4", "--out",
                                  (dir / "estimates.json").string()});
        REQUIRE(est.code == 0);
        const auto ej = nlohmann::json::parse(read_text_file(dir / "estimates.json"));
        CHECK(ej["parameters"].size() == kNumParams);
        CHECK(ej["number_of_draws"] == 20);

        const auto co = run_cli({"estimate", data, "--choice-only", "--draws", "20", "--scheme", "pseudo",
                                 "--init", (dir / "data" / "truth.json").string(), "--out",
                                 (dir / "choice_only.json").string()});
        REQUIRE(co.code == 0);
        CHECK(nlohmann::json::parse(read_text_file(dir / "choice_only.json"))["measurement"] == false);

        REQUIRE(run_cli({"wtp", (dir / "estimates.json").string(), "--out", (dir / "wtp.json").string()}).code == 0);
        const auto sm = run_cli({"summarize", data, "--out", (dir / "summary.json").string(), "--csv-dir",
                                 (dir / "tables").string()});
        REQUIRE(sm.code == 0);
        CHECK(fs::exists(dir / "tables" / "detour.csv"));
    }
    // Identical inputs and seeds give identical bytes.
    for (const char* f : {"design.csv", "data/respondents.csv", "data/likert.csv", "data/choices.csv",
                          "data/design.csv", "data/truth.json", "efa.json", "estimates.json", "choice_only.json",
                          "wtp.json", "summary.json", "tables/importance.csv"}) {
        INFO(f);
        CHECK(read_text_file(base / "a" / f) == read_text_file(base / "b" / f));
    }

    // The separately built binary agrees with the in-process entry point.
    const auto c = base / "c";
    fs::create_directories(c);
    REQUIRE(run_binary("design --k 54 --blocks 6 --seed 3 --out " + (c / "design.csv").string()) == 0);
    CHECK(read_text_file(c / "design.csv") == read_text_file(base / "a" / "design.csv"));
}
