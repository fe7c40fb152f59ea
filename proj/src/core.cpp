#include "hcm/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace hcm {

namespace {

constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "ASC_CS",        "ASC_STORE",     "B_CHILDREN",    "B_CO2",         "B_COST_CC",
    "B_COST_CS",     "B_FLEX",        "B_TIME_CC",     "B_TIME_CS",     "B_LV",
    "SIGMA_ALPHA",   "B0_F6",         "B0_F7",         "B0_F9",         "B0_F11",
    "B0_F12",        "B0_F14",        "B_F6",          "B_F7",          "B_F9",
    "B_F11",         "B_F12",         "B_F14",         "SIGMA_STAR_F6", "SIGMA_STAR_F7",
    "SIGMA_STAR_F9", "SIGMA_STAR_F11", "SIGMA_STAR_F12", "SIGMA_STAR_F14", "DELTA_1",
    "DELTA_2",       "B0_S",          "B_INCOME",      "B_AGE_30",      "B_PART_TIME",
    "B_HIGH_EDU",    "B_MEMBERS",     "B_MALE",        "B_NO_CAR",      "SIGMA_S"};

// Upper edges of the time bins in hours, per channel.
constexpr std::array<double, 3> kCsTimeEdges = {3.0, 6.0, 9.0};
constexpr std::array<double, 3> kCcTimeEdges = {6.0, 12.0, 24.0};

const std::array<double, 3>& time_edges(Channel c) {
    return c == Channel::CS ? kCsTimeEdges : kCcTimeEdges;
}

bool in_set(double v, std::initializer_list<double> set) {
    return std::any_of(set.begin(), set.end(), [v](double s) { return s == v; });
}

}  // namespace

std::vector<double> AttributeSpec::codes() const {
    std::vector<double> out;
    out.reserve(levels.size());
    for (const auto& l : levels) out.push_back(l.code);
    return out;
}

void AttributeSpec::validate() const {
    if (name.empty()) throw ValidationError("attribute with empty name");
    if (levels.size() < 2) throw ValidationError("attribute " + name + ": fewer than 2 levels");
    if (binary) {
        if (levels.size() != 2 || levels[0].code != 0.0 || levels[1].code != 1.0)
            throw ValidationError("attribute " + name + ": binary levels must be {0,1}");
        return;
    }
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i].code > levels[i - 1].code))
            throw ValidationError("attribute " + name + ": level codes not strictly increasing");
    }
}

std::vector<AttributeSpec> default_attributes() {
    auto time_spec = [](std::string name, Alternative alt, Channel ch,
                        std::array<std::string, 4> labels) {
        AttributeSpec s{std::move(name), alt, {}, "hours", false};
        for (int i = 1; i <= 4; ++i) s.levels.push_back({code_time_level(ch, i), labels[i - 1]});
        return s;
    };
    auto binary = [](std::string name, std::string off, std::string on) {
        return AttributeSpec{std::move(name), Alternative::CS, {{0.0, off}, {1.0, on}}, "", true};
    };
    return {
        AttributeSpec{"cs_cost", Alternative::CS, {{60, "60 UAH"}, {90, "90 UAH"}, {120, "120 UAH"}},
                      "UAH", false},
        time_spec("cs_time", Alternative::CS, Channel::CS,
                  {"less than 3 hours", "3-6 hours", "6-9 hours", "more than 9 hours"}),
        binary("cs_co2", "No reduction of CO2", "Reduction of CO2"),
        binary("cs_flex", "NO", "YES"),
        AttributeSpec{"cc_cost", Alternative::CC, {{50, "50 UAH"}, {75, "75 UAH"}, {100, "100 UAH"}},
                      "UAH", false},
        time_spec("cc_time", Alternative::CC, Channel::CC,
                  {"less than 6 hours", "6-12 hours", "12-24 hours", "more than 24 hours"}),
    };
}

void validate_task(const ChoiceTask& t) {
    std::vector<std::string> bad;
    if (!in_set(t.cs_cost, {60, 90, 120})) bad.push_back("cs_cost");
    if (!in_set(t.cs_time, {1.5, 4.5, 7.5, 10.5})) bad.push_back("cs_time");
    if (t.cs_co2 != 0 && t.cs_co2 != 1) bad.push_back("cs_co2");
    if (t.cs_flex != 0 && t.cs_flex != 1) bad.push_back("cs_flex");
    if (!in_set(t.cc_cost, {50, 75, 100})) bad.push_back("cc_cost");
    if (!in_set(t.cc_time, {3, 9, 18, 30})) bad.push_back("cc_time");
    if (t.block_id < 1) bad.push_back("block_id");
    if (t.task_id < 1) bad.push_back("task_id");
    if (!bad.empty()) {
        std::string msg = "task (block " + std::to_string(t.block_id) + ", task " +
                          std::to_string(t.task_id) + ") off the level set:";
        for (const auto& b : bad) msg += " " + b;
        throw ValidationError(msg);
    }
}

double code_time_level(Channel channel, int level_index) {
    if (level_index < 1 || level_index > 4)
        throw CodingError("time level index " + std::to_string(level_index) + " outside 1..4");
    const auto& edges = time_edges(channel);
    if (level_index == 4) {
        const double width = edges[2] - edges[1];
        return edges[2] + width / 2.0;
    }
    const double lo = level_index == 1 ? 0.0 : edges[level_index - 2];
    return (lo + edges[level_index - 1]) / 2.0;
}

std::string time_level_label(Channel channel, double hours) {
    const auto& e = time_edges(channel);
    auto fmt = [](double v) { return std::to_string(static_cast<int>(v)); };
    for (int i = 1; i <= 4; ++i) {
        if (code_time_level(channel, i) != hours) continue;
        switch (i) {
            case 1: return fmt(e[0]) + " hours or less";
            case 2: return fmt(e[0]) + "-" + fmt(e[1]) + " hours";
            case 3: return fmt(e[1]) + "-" + fmt(e[2]) + " hours";
            default: return "more than " + fmt(e[2]) + " hours";
        }
    }
    throw CodingError("time code " + std::to_string(hours) + " is not a level midpoint");
}

std::string_view to_string(Choice c) {
    switch (c) {
        case Choice::CS: return "CS";
        case Choice::CC: return "CC";
        case Choice::Store: return "STORE";
    }
    return "?";
}

std::string_view to_string(Gender g) { return g == Gender::Male ? "male" : "female"; }

std::string_view to_string(Employment e) {
    switch (e) {
        case Employment::Full: return "full";
        case Employment::Part: return "part";
        case Employment::Unemployed: return "unemployed";
        case Employment::Housekeeper: return "housekeeper";
        case Employment::Student: return "student";
    }
    return "?";
}

std::string_view to_string(CsMode m) {
    switch (m) {
        case CsMode::Car: return "car";
        case CsMode::Subway: return "subway";
        case CsMode::Bus: return "bus";
        case CsMode::TramTrolley: return "tram_trolley";
        case CsMode::Bicycle: return "bicycle";
        case CsMode::Walk: return "walk";
    }
    return "?";
}

std::optional<Choice> parse_choice(std::string_view s) {
    for (auto c : {Choice::CS, Choice::CC, Choice::Store})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) {
    for (auto g : {Gender::Female, Gender::Male})
        if (to_string(g) == s) return g;
    return std::nullopt;
}

std::optional<Employment> parse_employment(std::string_view s) {
    for (auto e : {Employment::Full, Employment::Part, Employment::Unemployed,
                   Employment::Housekeeper, Employment::Student})
        if (to_string(e) == s) return e;
    return std::nullopt;
}

std::optional<CsMode> parse_mode(std::string_view s) {
    for (auto m : kAllModes)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::string statement_name(std::size_t index) { return "F" + std::to_string(index + 1); }

std::optional<std::size_t> statement_index(std::string_view name) {
    for (std::size_t i = 0; i < kStatements; ++i)
        if (statement_name(i) == name) return i;
    return std::nullopt;
}

std::vector<std::string> check_respondent(const RespondentRecord& r) {
    std::vector<std::string> errs;
    auto bad = [&errs](std::string field, std::string msg) {
        errs.push_back(std::move(field) + ": " + std::move(msg));
    };
    if (r.id.empty()) bad("id", "empty");
    if (r.id.find_first_of(",\"\n\r") != std::string::npos) bad("id", "contains a separator");
    if (r.age_years < 18) bad("age_years", "must be at least 18");
    if (r.household_size < 1) bad("household_size", "must be at least 1");
    if (r.n_children < 0) bad("n_children", "must be non-negative");
    if (r.n_children >= r.household_size && r.household_size >= 1)
        bad("n_children", "must be smaller than household_size");
    if (!(r.income_uah_month > 0.0) || !std::isfinite(r.income_uah_month))
        bad("income_uah_month", "must be positive");
    for (std::size_t i = 0; i < kStatements; ++i) {
        if (r.likert[i] < 1 || r.likert[i] > 5)
            bad("likert." + statement_name(i), "out of range 1..5");
    }
    if (r.block_id < 1) bad("block_id", "must be at least 1");
    if (r.choices.size() != static_cast<std::size_t>(kTasksPerRespondent))
        bad("choices", "expected " + std::to_string(kTasksPerRespondent) + " entries, got " +
                           std::to_string(r.choices.size()));
    if (!(r.supply.remuneration_uah >= 50.0 && r.supply.remuneration_uah <= 120.0))
        bad("remuneration_supply_uah", "out of range 50..120");
    if (!(r.demand_remuneration_uah >= 50.0 && r.demand_remuneration_uah <= 120.0))
        bad("remuneration_demand_uah", "out of range 50..120");
    if (!(r.supply.detour_min >= 15.0 && r.supply.detour_min <= 60.0))
        bad("detour_min", "out of range 15..60");
    for (std::size_t i = 0; i < kImportanceItems; ++i) {
        const auto& v = r.importance[i];
        if (v && (*v < 1 || *v > 4))
            bad("importance." + std::string(kImportanceNames[i]), "out of range 1..4");
    }
    return errs;
}

double income_band_midpoint(int band_index) {
    if (band_index < 1 || band_index > static_cast<int>(kIncomeBandMidpoints.size()))
        throw CodingError("income band " + std::to_string(band_index) + " outside 1..7");
    return kIncomeBandMidpoints[band_index - 1];
}

ScaledFeatures scale_covariates(const RespondentRecord& record, const ChoiceTask& task) {
    ScaledFeatures f;
    f.cs_cost = task.cs_cost / kCostScale;
    f.cs_time = task.cs_time / kTimeScale;
    f.cc_cost = task.cc_cost / kCostScale;
    f.cc_time = task.cc_time / kTimeScale;
    f.income = record.income_uah_month / kIncomeScale;
    f.co2_income = task.cs_co2 * f.income;
    f.flex_income = task.cs_flex * f.income;
    f.n_children = record.n_children;
    return f;
}

UnscaledFeatures unscale(const ScaledFeatures& f) {
    UnscaledFeatures u{};
    u.cs_cost = f.cs_cost * kCostScale;
    u.cs_time = f.cs_time * kTimeScale;
    u.cc_cost = f.cc_cost * kCostScale;
    u.cc_time = f.cc_time * kTimeScale;
    u.income = f.income * kIncomeScale;
    u.co2 = f.income != 0.0 ? f.co2_income / f.income : 0.0;
    u.flex = f.income != 0.0 ? f.flex_income / f.income : 0.0;
    return u;
}

std::array<double, kStructuralCovariates> structural_covariates(const RespondentRecord& r) {
    return {
        r.income_uah_month / kIncomeScale,
        r.age_years > 30 ? 1.0 : 0.0,
        r.employment == Employment::Part ? 1.0 : 0.0,
        r.education_high ? 1.0 : 0.0,
        r.household_size >= 3 ? 1.0 : 0.0,
        r.gender == Gender::Male ? 1.0 : 0.0,
        r.car_in_household ? 0.0 : 1.0,
    };
}

std::string_view param_name(std::size_t index) { return kParamNames.at(index); }

std::optional<std::size_t> param_index(std::string_view name) {
    for (std::size_t i = 0; i < kNumParams; ++i)
        if (kParamNames[i] == name) return i;
    return std::nullopt;
}

bool is_positive_param(std::size_t i) {
    return i == idx(Param::SigmaAlpha) || i == idx(Param::SigmaS) || i == idx(Param::Delta1) ||
           i == idx(Param::Delta2) ||
           (i >= idx(Param::SigmaStarF6) && i <= idx(Param::SigmaStarF14));
}

bool is_choice_param(std::size_t i) { return i <= idx(Param::SigmaAlpha); }

bool is_measurement_param(std::size_t i) {
    return i >= idx(Param::Beta0F6) && i <= idx(Param::Delta2);
}

bool is_structural_param(std::size_t i) {
    return i >= idx(Param::Beta0S) && i <= idx(Param::SigmaS);
}

ParameterSet published_estimates() {
    ParameterSet p;
    p[Param::AscCs] = -0.112;
    p[Param::AscStore] = -1.91;
    p[Param::BetaChildren] = -0.288;
    p[Param::BetaCo2] = -0.00477;
    p[Param::BetaCostCc] = -3.05;
    p[Param::BetaCostCs] = -1.95;
    p[Param::BetaFlex] = 0.125;
    p[Param::BetaTimeCc] = -0.621;
    p[Param::BetaTimeCs] = -1.44;
    p[Param::BetaLv] = 0.138;
    p[Param::SigmaAlpha] = 0.528;

    constexpr std::array<double, kMeasured> beta0 = {-0.495, -0.0526, -1.4, -0.915, -1.12, -0.936};
    constexpr std::array<double, kMeasured> loading = {1.07, 0.804, 0.952, 1.19, 1.33, 1.05};
    constexpr std::array<double, kMeasured> sigma = {0.961, 0.697, 1.29, 0.626, 0.773, 0.922};
    for (std::size_t k = 0; k < kMeasured; ++k) {
        p[beta0_index(k)] = beta0[k];
        p[loading_index(k)] = loading[k];
        p[sigma_star_index(k)] = sigma[k];
    }
    p[Param::Delta1] = 0.653;
    p[Param::Delta2] = 0.752;

    p[Param::Beta0S] = 2.15;
    p[Param::BetaIncome] = -0.182;
    p[Param::BetaAge30] = 0.424;
    p[Param::BetaPartTime] = 0.17;
    p[Param::BetaHighEdu] = -0.55;
    p[Param::BetaMembers] = 0.222;
    p[Param::BetaMale] = -0.147;
    p[Param::BetaNoCar] = 0.0808;
    p[Param::SigmaS] = 0.815;
    return p;
}

ParameterSet default_start_values() {
    ParameterSet p;
    p[Param::SigmaAlpha] = 1.0;
    p[Param::SigmaS] = 1.0;
    for (std::size_t k = 0; k < kMeasured; ++k) {
        p[loading_index(k)] = 1.0;
        p[sigma_star_index(k)] = 1.0;
    }
    p[Param::Delta1] = 0.5;
    p[Param::Delta2] = 0.5;
    return p;
}

int Dataset::n_blocks() const {
    int b = 0;
    for (const auto& t : design) b = std::max(b, t.block_id);
    return b;
}

std::vector<ChoiceTask> Dataset::block_tasks(int block_id) const {
    std::vector<ChoiceTask> out;
    for (const auto& t : design)
        if (t.block_id == block_id) out.push_back(t);
    std::sort(out.begin(), out.end(),
              [](const ChoiceTask& a, const ChoiceTask& b) { return a.task_id < b.task_id; });
    return out;
}

void Dataset::validate() const {
    std::vector<std::string> errs;
    for (const auto& a : attributes) {
        try {
            a.validate();
        } catch (const ValidationError& e) {
            errs.emplace_back(e.what());
        }
    }
    std::map<int, std::set<int>> tasks_per_block;
    for (const auto& t : design) {
        try {
            validate_task(t);
        } catch (const ValidationError& e) {
            errs.emplace_back(e.what());
        }
        if (!tasks_per_block[t.block_id].insert(t.task_id).second)
            errs.push_back("design: duplicate task " + std::to_string(t.task_id) + " in block " +
                           std::to_string(t.block_id));
    }
    std::set<std::string> ids;
    for (const auto& r : respondents) {
        for (const auto& e : check_respondent(r)) errs.push_back("respondent " + r.id + " " + e);
        if (!ids.insert(r.id).second) errs.push_back("respondent " + r.id + ": duplicate id");
        auto it = tasks_per_block.find(r.block_id);
        if (it == tasks_per_block.end()) {
            errs.push_back("respondent " + r.id + ": block " + std::to_string(r.block_id) +
                           " not in design");
        } else if (it->second.size() != r.choices.size()) {
            errs.push_back("respondent " + r.id + ": " + std::to_string(r.choices.size()) +
                           " choices for a block of " + std::to_string(it->second.size()) +
                           " tasks");
        }
    }
    if (!errs.empty()) {
        std::ostringstream os;
        os << "dataset invalid (" << errs.size() << " problems):";
        for (const auto& e : errs) os << "\n  " << e;
        throw ValidationError(os.str());
    }
}

std::string_view to_string(DrawScheme s) {
    return s == DrawScheme::Halton ? "halton" : "pseudo";
}

std::optional<DrawScheme> parse_scheme(std::string_view s) {
    if (s == "halton") return DrawScheme::Halton;
    if (s == "pseudo" || s == "pseudo-random") return DrawScheme::PseudoRandom;
    return std::nullopt;
}

}  // namespace hcm
