#include "hcm/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hcm {

using nlohmann::json;

ParseError::ParseError(std::string file, std::size_t row, std::string column,
                       const std::string& message)
    : Error(file + (row ? ":" + std::to_string(row) : std::string()) +
            (column.empty() ? std::string() : " [" + column + "]") + ": " + message),
      file_(std::move(file)),
      row_(row),
      column_(std::move(column)) {}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
    return {dir / "design.csv", dir / "respondents.csv", dir / "likert.csv", dir / "choices.csv",
            dir / "attrs.json"};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

// Comma-separated table with a header row; no quoting (the schema has no
// free-text fields).
class CsvTable {
public:
    CsvTable(const std::string& text, std::string file) : file_(std::move(file)) {
        std::istringstream in(text);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto cells = split(line);
            if (row == 1) {
                header_ = std::move(cells);
                continue;
            }
            if (cells.size() != header_.size())
                throw ParseError(file_, row, "",
                                 "expected " + std::to_string(header_.size()) + " cells, got " +
                                     std::to_string(cells.size()));
            rows_.push_back({row, std::move(cells)});
        }
        if (header_.empty()) throw ParseError(file_, 1, "", "missing header row");
    }

    void require_columns(std::initializer_list<std::string_view> names) const {
        for (auto n : names) {
            bool found = false;
            for (const auto& h : header_) found = found || h == n;
            if (!found) throw ParseError(file_, 1, std::string(n), "missing column");
        }
    }

    struct Row {
        std::size_t line;
        std::vector<std::string> cells;
    };

    const std::vector<Row>& rows() const { return rows_; }

    const std::string& cell(const Row& r, std::string_view column) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == column) return r.cells[i];
        throw ParseError(file_, 1, std::string(column), "missing column");
    }

    double number(const Row& r, std::string_view column) const {
        const auto& s = cell(r, column);
        double v = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() ||
            !std::isfinite(v))
            fail(r, column, "not a number: '" + s + "'");
        return v;
    }

    int integer(const Row& r, std::string_view column) const {
        const double v = number(r, column);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(r, column, "not an integer");
        return static_cast<int>(v);
    }

    int flag(const Row& r, std::string_view column) const {
        const int v = integer(r, column);
        if (v != 0 && v != 1) fail(r, column, "expected 0 or 1");
        return v;
    }

    [[noreturn]] void fail(const Row& r, std::string_view column, const std::string& msg) const {
        throw ParseError(file_, r.line, std::string(column), msg);
    }

    const std::string& file() const { return file_; }

private:
    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            auto pos = line.find(',', start);
            out.push_back(line.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        return out;
    }

    std::string file_;
    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

std::string join(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += c;
        first = false;
    }
    out += '\n';
    return out;
}

std::string fmt_int(long v) { return std::to_string(v); }

std::string alt_name(Alternative a) {
    switch (a) {
        case Alternative::CS: return "CS";
        case Alternative::CC: return "CC";
        case Alternative::Both: return "BOTH";
    }
    return "BOTH";
}

}  // namespace

std::vector<ChoiceTask> parse_design_csv(const std::string& text, const std::string& label) {
    CsvTable t(text, label);
    t.require_columns(
        {"block_id", "task_id", "cs_cost", "cs_time", "cs_co2", "cs_flex", "cc_cost", "cc_time"});
    std::vector<ChoiceTask> out;
    for (const auto& r : t.rows()) {
        ChoiceTask task{t.integer(r, "block_id"), t.integer(r, "task_id"), t.number(r, "cs_cost"),
                        t.number(r, "cs_time"),   t.flag(r, "cs_co2"),     t.flag(r, "cs_flex"),
                        t.number(r, "cc_cost"),   t.number(r, "cc_time")};
        try {
            validate_task(task);
        } catch (const ValidationError& e) {
            t.fail(r, "", e.what());
        }
        out.push_back(task);
    }
    return out;
}

std::vector<ChoiceTask> read_design(const std::filesystem::path& path) {
    return parse_design_csv(read_text_file(path), path.string());
}

std::vector<AttributeSpec> read_attributes(const std::filesystem::path& path) {
    const std::string file = path.string();
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError(file, 0, "", e.what());
    }
    if (!j.is_array()) throw ParseError(file, 0, "", "expected an array of attributes");
    std::vector<AttributeSpec> out;
    try {
        for (const auto& a : j) {
            AttributeSpec s;
            s.name = a.at("name").get<std::string>();
            const auto alt = a.value("alternative", std::string("BOTH"));
            s.alternative = alt == "CS" ? Alternative::CS
                            : alt == "CC" ? Alternative::CC
                                          : Alternative::Both;
            s.unit = a.value("unit", std::string());
            s.binary = a.value("binary", false);
            for (const auto& l : a.at("levels")) {
                if (l.is_number()) {
                    s.levels.push_back({l.get<double>(), format_number(l.get<double>())});
                } else {
                    s.levels.push_back({l.at("code").get<double>(), l.value("label", std::string())});
                }
            }
            s.validate();
            out.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError(file, 0, "", e.what());
    } catch (const ValidationError& e) {
        throw ParseError(file, 0, "", e.what());
    }
    if (out.empty()) throw ParseError(file, 0, "", "no attributes");
    return out;
}

std::string attributes_json(const std::vector<AttributeSpec>& attributes) {
    using ojson = nlohmann::ordered_json;
    ojson j = ojson::array();
    for (const auto& a : attributes) {
        ojson levels = ojson::array();
        for (const auto& l : a.levels) levels.push_back({{"code", l.code}, {"label", l.label}});
        j.push_back({{"name", a.name},
                     {"alternative", alt_name(a.alternative)},
                     {"unit", a.unit},
                     {"binary", a.binary},
                     {"levels", levels}});
    }
    return j.dump(2) + "\n";
}

std::string design_csv(const std::vector<ChoiceTask>& design) {
    std::string out = "block_id,task_id,cs_cost,cs_time,cs_co2,cs_flex,cc_cost,cc_time\n";
    for (const auto& t : design) {
        out += join({fmt_int(t.block_id), fmt_int(t.task_id), format_number(t.cs_cost),
                     format_number(t.cs_time), fmt_int(t.cs_co2), fmt_int(t.cs_flex),
                     format_number(t.cc_cost), format_number(t.cc_time)});
    }
    return out;
}

std::string respondents_csv(const std::vector<RespondentRecord>& respondents) {
    std::string out =
        "respondent_id,block_id,age_years,gender,household_size,n_children,car_in_household,"
        "income_uah_month,employment,education_high,remuneration_supply_uah,"
        "remuneration_demand_uah,cs_mode,detour_min,importance_cost,importance_time,"
        "importance_eco,importance_flex\n";
    auto imp = [](const std::optional<int>& v) { return v ? fmt_int(*v) : std::string(); };
    for (const auto& r : respondents) {
        out += join({r.id, fmt_int(r.block_id), fmt_int(r.age_years), std::string(to_string(r.gender)),
                     fmt_int(r.household_size), fmt_int(r.n_children),
                     fmt_int(r.car_in_household ? 1 : 0), format_number(r.income_uah_month),
                     std::string(to_string(r.employment)), fmt_int(r.education_high ? 1 : 0),
                     format_number(r.supply.remuneration_uah),
                     format_number(r.demand_remuneration_uah),
                     std::string(to_string(r.supply.cs_mode)), format_number(r.supply.detour_min),
                     imp(r.importance[0]), imp(r.importance[1]), imp(r.importance[2]),
                     imp(r.importance[3])});
    }
    return out;
}

std::string likert_csv(const std::vector<RespondentRecord>& respondents) {
    std::string out = "respondent_id,statement,score\n";
    for (const auto& r : respondents)
        for (std::size_t i = 0; i < kStatements; ++i)
            out += join({r.id, statement_name(i), fmt_int(r.likert[i])});
    return out;
}

std::string choices_csv(const std::vector<RespondentRecord>& respondents) {
    std::string out = "respondent_id,task_id,choice\n";
    for (const auto& r : respondents)
        for (std::size_t t = 0; t < r.choices.size(); ++t)
            out += join({r.id, fmt_int(static_cast<long>(t + 1)), std::string(to_string(r.choices[t]))});
    return out;
}

Dataset read_dataset(const DatasetPaths& paths) {
    Dataset d;
    if (!paths.attributes.empty() && std::filesystem::exists(paths.attributes))
        d.attributes = read_attributes(paths.attributes);
    d.design = read_design(paths.design);

    std::map<std::string, std::size_t> by_id;
    {
        const std::string file = paths.respondents.string();
        CsvTable t(read_text_file(paths.respondents), file);
        t.require_columns({"respondent_id", "block_id", "age_years", "gender", "household_size",
                           "n_children", "car_in_household", "income_uah_month", "employment",
                           "education_high", "remuneration_supply_uah", "remuneration_demand_uah",
                           "cs_mode", "detour_min", "importance_cost", "importance_time",
                           "importance_eco", "importance_flex"});
        for (const auto& row : t.rows()) {
            RespondentRecord r;
            r.id = t.cell(row, "respondent_id");
            if (r.id.empty()) t.fail(row, "respondent_id", "empty id");
            if (!by_id.emplace(r.id, d.respondents.size()).second)
                t.fail(row, "respondent_id", "duplicate id " + r.id);
            r.block_id = t.integer(row, "block_id");
            r.age_years = t.integer(row, "age_years");
            if (r.age_years < 18) t.fail(row, "age_years", "must be at least 18");
            auto g = parse_gender(t.cell(row, "gender"));
            if (!g) t.fail(row, "gender", "unknown gender '" + t.cell(row, "gender") + "'");
            r.gender = *g;
            r.household_size = t.integer(row, "household_size");
            if (r.household_size < 1) t.fail(row, "household_size", "must be at least 1");
            r.n_children = t.integer(row, "n_children");
            if (r.n_children < 0) t.fail(row, "n_children", "must be non-negative");
            r.car_in_household = t.flag(row, "car_in_household") == 1;
            r.income_uah_month = t.number(row, "income_uah_month");
            if (!(r.income_uah_month > 0)) t.fail(row, "income_uah_month", "must be positive");
            auto e = parse_employment(t.cell(row, "employment"));
            if (!e) t.fail(row, "employment", "unknown employment '" + t.cell(row, "employment") + "'");
            r.employment = *e;
            r.education_high = t.flag(row, "education_high") == 1;
            r.supply.remuneration_uah = t.number(row, "remuneration_supply_uah");
            r.demand_remuneration_uah = t.number(row, "remuneration_demand_uah");
            auto m = parse_mode(t.cell(row, "cs_mode"));
            if (!m) t.fail(row, "cs_mode", "unknown mode '" + t.cell(row, "cs_mode") + "'");
            r.supply.cs_mode = *m;
            r.supply.detour_min = t.number(row, "detour_min");
            for (std::size_t i = 0; i < kImportanceItems; ++i) {
                const std::string col = "importance_" + std::string(kImportanceNames[i]);
                if (t.cell(row, col).empty()) continue;
                const int v = t.integer(row, col);
                if (v < 1 || v > 4) t.fail(row, col, "out of range 1..4");
                r.importance[i] = v;
            }
            r.likert.fill(0);
            d.respondents.push_back(std::move(r));
        }
    }
    {
        const std::string file = paths.likert.string();
        CsvTable t(read_text_file(paths.likert), file);
        t.require_columns({"respondent_id", "statement", "score"});
        for (const auto& row : t.rows()) {
            auto it = by_id.find(t.cell(row, "respondent_id"));
            if (it == by_id.end()) t.fail(row, "respondent_id", "unknown respondent");
            auto s = statement_index(t.cell(row, "statement"));
            if (!s) t.fail(row, "statement", "unknown statement '" + t.cell(row, "statement") + "'");
            const int score = t.integer(row, "score");
            if (score < 1 || score > 5) t.fail(row, "score", "out of range 1..5");
            auto& slot = d.respondents[it->second].likert[*s];
            if (slot != 0) t.fail(row, "statement", "duplicate statement");
            slot = score;
        }
        for (const auto& r : d.respondents)
            for (std::size_t i = 0; i < kStatements; ++i)
                if (r.likert[i] == 0)
                    throw ParseError(file, 0, "score",
                                     "respondent " + r.id + " missing " + statement_name(i));
    }
    {
        const std::string file = paths.choices.string();
        CsvTable t(read_text_file(paths.choices), file);
        t.require_columns({"respondent_id", "task_id", "choice"});
        std::vector<std::map<int, Choice>> per(d.respondents.size());
        for (const auto& row : t.rows()) {
            auto it = by_id.find(t.cell(row, "respondent_id"));
            if (it == by_id.end()) t.fail(row, "respondent_id", "unknown respondent");
            const int task = t.integer(row, "task_id");
            if (task < 1 || task > kTasksPerRespondent) t.fail(row, "task_id", "outside 1..9");
            auto c = parse_choice(t.cell(row, "choice"));
            if (!c) t.fail(row, "choice", "expected CS, CC or STORE");
            if (!per[it->second].emplace(task, *c).second) t.fail(row, "task_id", "duplicate task");
        }
        for (std::size_t i = 0; i < d.respondents.size(); ++i) {
            if (per[i].size() != static_cast<std::size_t>(kTasksPerRespondent))
                throw ParseError(file, 0, "task_id",
                                 "respondent " + d.respondents[i].id + " has " +
                                     std::to_string(per[i].size()) + " choices, expected 9");
            for (const auto& [task, c] : per[i]) d.respondents[i].choices.push_back(c);
        }
    }
    try {
        d.validate();
    } catch (const ValidationError& e) {
        throw ParseError(paths.respondents.string(), 0, "", e.what());
    }
    return d;
}

std::vector<LikertRow> read_likert(const std::filesystem::path& path) {
    const std::string file = path.string();
    CsvTable t(read_text_file(path), file);
    t.require_columns({"respondent_id", "statement", "score"});
    std::vector<LikertRow> out;
    std::map<std::string, std::size_t> by_id;
    for (const auto& row : t.rows()) {
        const auto& id = t.cell(row, "respondent_id");
        if (id.empty()) t.fail(row, "respondent_id", "empty id");
        auto [it, fresh] = by_id.emplace(id, out.size());
        if (fresh) {
            out.push_back({id, {}});
            out.back().scores.fill(0);
        }
        auto s = statement_index(t.cell(row, "statement"));
        if (!s) t.fail(row, "statement", "unknown statement '" + t.cell(row, "statement") + "'");
        const int score = t.integer(row, "score");
        if (score < 1 || score > 5) t.fail(row, "score", "out of range 1..5");
        auto& slot = out[it->second].scores[*s];
        if (slot != 0) t.fail(row, "statement", "duplicate statement");
        slot = score;
    }
    for (const auto& r : out)
        for (std::size_t i = 0; i < kStatements; ++i)
            if (r.scores[i] == 0)
                throw ParseError(file, 0, "score", "respondent " + r.id + " missing " + statement_name(i));
    std::sort(out.begin(), out.end(), [](const LikertRow& a, const LikertRow& b) { return a.id < b.id; });
    return out;
}

void write_dataset(const Dataset& dataset, const DatasetPaths& paths) {
    write_text_file(paths.design, design_csv(dataset.design));
    write_text_file(paths.respondents, respondents_csv(dataset.respondents));
    write_text_file(paths.likert, likert_csv(dataset.respondents));
    write_text_file(paths.choices, choices_csv(dataset.respondents));
    if (!paths.attributes.empty()) write_text_file(paths.attributes, attributes_json(dataset.attributes));
}

std::string params_json(const ParameterSet& params) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(param_name(i))] = params[i];
    return j.dump(2) + "\n";
}

ParameterSet parse_params_json(const std::string& text, const std::string& file) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(file, 0, "", e.what());
    }
    // estimates.json nests the values under "parameters"; accept both shapes.
    if (j.is_object() && j.contains("parameters") && j["parameters"].is_array()) {
        json flat = json::object();
        for (const auto& p : j["parameters"]) flat[p.at("name").get<std::string>()] = p.at("value");
        j = flat;
    }
    if (!j.is_object()) throw ParseError(file, 0, "", "expected an object of name -> value");
    ParameterSet p;
    std::set<std::size_t> seen;
    for (const auto& [name, value] : j.items()) {
        auto i = param_index(name);
        if (!i) throw ParseError(file, 0, name, "unknown parameter");
        if (!value.is_number()) throw ParseError(file, 0, name, "not a number");
        p[*i] = value.get<double>();
        if (is_positive_param(*i) && !(p[*i] > 0.0))
            throw ParseError(file, 0, name, "must be strictly positive");
        seen.insert(*i);
    }
    for (std::size_t i = 0; i < kNumParams; ++i)
        if (!seen.count(i)) throw ParseError(file, 0, std::string(param_name(i)), "missing parameter");
    return p;
}

ParameterSet read_params(const std::filesystem::path& path) {
    return parse_params_json(read_text_file(path), path.string());
}

void write_params(const ParameterSet& params, const std::filesystem::path& path) {
    write_text_file(path, params_json(params));
}

}  // namespace hcm
