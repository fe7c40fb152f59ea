#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hcm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CodingError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Attributes and choice tasks

enum class Alternative { CS, CC, Both };
enum class Channel { CS, CC };
enum class Choice { CS = 0, CC = 1, Store = 2 };

inline constexpr std::size_t kAlternatives = 3;
inline constexpr int kTasksPerRespondent = 9;

struct Level {
    double code = 0.0;
    std::string label;

    bool operator==(const Level&) const = default;
};

struct AttributeSpec {
    std::string name;
    Alternative alternative = Alternative::Both;
    std::vector<Level> levels;
    std::string unit;
    bool binary = false;

    std::vector<double> codes() const;
    // Throws ValidationError when the level set is malformed.
    void validate() const;

    bool operator==(const AttributeSpec&) const = default;
};

// Cost, time, CO2, flexibility for CS then cost, time for CC; the column
// order of design.csv.
std::vector<AttributeSpec> default_attributes();

struct ChoiceTask {
    int block_id = 1;
    int task_id = 1;
    double cs_cost = 0.0;
    double cs_time = 0.0;
    int cs_co2 = 0;
    int cs_flex = 0;
    double cc_cost = 0.0;
    double cc_time = 0.0;

    bool operator==(const ChoiceTask&) const = default;
};

// Throws ValidationError unless every attribute is on its level set.
void validate_task(const ChoiceTask& task);

// Midpoint code in hours for a time level (1-based); open-ended top bins are
// one prior interval wide.
double code_time_level(Channel channel, int level_index);
std::string time_level_label(Channel channel, double hours);

// ---------------------------------------------------------------------------
// Respondents

enum class Gender { Female, Male };
enum class Employment { Full, Part, Unemployed, Housekeeper, Student };
enum class CsMode { Car, Subway, Bus, TramTrolley, Bicycle, Walk };

inline constexpr std::size_t kStatements = 15;
inline constexpr std::size_t kImportanceItems = 4;
inline constexpr std::array<std::string_view, kImportanceItems> kImportanceNames = {
    "cost", "time", "eco", "flex"};
inline constexpr std::array<CsMode, 6> kAllModes = {
    CsMode::Car, CsMode::Subway, CsMode::Bus, CsMode::TramTrolley, CsMode::Bicycle, CsMode::Walk};

std::string_view to_string(Choice c);
std::string_view to_string(Gender g);
std::string_view to_string(Employment e);
std::string_view to_string(CsMode m);
std::optional<Choice> parse_choice(std::string_view s);
std::optional<Gender> parse_gender(std::string_view s);
std::optional<Employment> parse_employment(std::string_view s);
std::optional<CsMode> parse_mode(std::string_view s);

// "F1".."F15" <-> 0..14
std::string statement_name(std::size_t index);
std::optional<std::size_t> statement_index(std::string_view name);

struct SupplyAnswers {
    double remuneration_uah = 80.0;
    CsMode cs_mode = CsMode::Subway;
    double detour_min = 30.0;

    bool operator==(const SupplyAnswers&) const = default;
};

struct RespondentRecord {
    std::string id;
    int age_years = 18;
    Gender gender = Gender::Female;
    int household_size = 1;
    int n_children = 0;
    bool car_in_household = false;
    double income_uah_month = 1.0;
    Employment employment = Employment::Full;
    bool education_high = false;
    std::array<int, kStatements> likert{};
    int block_id = 1;
    std::vector<Choice> choices;
    SupplyAnswers supply;
    // What the respondent would pay as a customer (same 50-120 UAH range).
    double demand_remuneration_uah = 80.0;
    // 4-point importance of cost, time, eco contribution and flexibility.
    std::array<std::optional<int>, kImportanceItems> importance{};

    bool operator==(const RespondentRecord&) const = default;
};

// Collects every invariant violation as "field: message" items.
std::vector<std::string> check_respondent(const RespondentRecord& r);

// Income bands of the survey, coded at midpoints; the open top band is 55,000.
inline constexpr std::array<double, 7> kIncomeBandMidpoints = {2500.0,  7500.0,  15000.0, 25000.0,
                                                               35000.0, 45000.0, 55000.0};
double income_band_midpoint(int band_index);

// ---------------------------------------------------------------------------
// Scaling

inline constexpr double kCostScale = 100.0;
inline constexpr double kTimeScale = 10.0;
inline constexpr double kIncomeScale = 10000.0;

struct ScaledFeatures {
    double cs_cost = 0.0;
    double cs_time = 0.0;
    double cc_cost = 0.0;
    double cc_time = 0.0;
    double income = 0.0;
    double co2_income = 0.0;
    double flex_income = 0.0;
    double n_children = 0.0;
};

ScaledFeatures scale_covariates(const RespondentRecord& record, const ChoiceTask& task);

// Recovers the raw task attributes and income; binaries come back through the
// interaction terms, so they are only recoverable when income > 0.
struct UnscaledFeatures {
    double cs_cost, cs_time, cc_cost, cc_time, income, co2, flex;
};
UnscaledFeatures unscale(const ScaledFeatures& f);

// Structural covariates in the order of the structural parameters after the
// constant: income/10000, age > 30, part time, high education, household of
// three or more, male, no car.
inline constexpr std::size_t kStructuralCovariates = 7;
std::array<double, kStructuralCovariates> structural_covariates(const RespondentRecord& r);

// ---------------------------------------------------------------------------
// Parameters

enum class Param : std::size_t {
    AscCs,
    AscStore,
    BetaChildren,
    BetaCo2,
    BetaCostCc,
    BetaCostCs,
    BetaFlex,
    BetaTimeCc,
    BetaTimeCs,
    BetaLv,
    SigmaAlpha,
    Beta0F6,
    Beta0F7,
    Beta0F9,
    Beta0F11,
    Beta0F12,
    Beta0F14,
    BetaF6,
    BetaF7,
    BetaF9,
    BetaF11,
    BetaF12,
    BetaF14,
    SigmaStarF6,
    SigmaStarF7,
    SigmaStarF9,
    SigmaStarF11,
    SigmaStarF12,
    SigmaStarF14,
    Delta1,
    Delta2,
    Beta0S,
    BetaIncome,
    BetaAge30,
    BetaPartTime,
    BetaHighEdu,
    BetaMembers,
    BetaMale,
    BetaNoCar,
    SigmaS,
    Count
};

inline constexpr std::size_t kNumParams = static_cast<std::size_t>(Param::Count);
inline constexpr std::size_t idx(Param p) { return static_cast<std::size_t>(p); }

// Estimated measurement indicators (F2 is the normalized anchor, see
// likelihood.hpp).
inline constexpr std::size_t kMeasured = 6;
inline constexpr std::array<std::size_t, kMeasured> kMeasuredStatements = {5, 6, 8, 10, 11, 13};
inline constexpr std::size_t kAnchorStatement = 1;

inline constexpr std::size_t beta0_index(std::size_t k) { return idx(Param::Beta0F6) + k; }
inline constexpr std::size_t loading_index(std::size_t k) { return idx(Param::BetaF6) + k; }
inline constexpr std::size_t sigma_star_index(std::size_t k) { return idx(Param::SigmaStarF6) + k; }
inline constexpr std::size_t structural_beta_index(std::size_t k) {
    return idx(Param::BetaIncome) + k;
}

std::string_view param_name(std::size_t index);
std::optional<std::size_t> param_index(std::string_view name);
bool is_positive_param(std::size_t index);
bool is_choice_param(std::size_t index);
bool is_measurement_param(std::size_t index);
bool is_structural_param(std::size_t index);

class ParameterSet {
public:
    ParameterSet() { values_.fill(0.0); }

    double& operator[](Param p) { return values_[idx(p)]; }
    double operator[](Param p) const { return values_[idx(p)]; }
    double& operator[](std::size_t i) { return values_.at(i); }
    double operator[](std::size_t i) const { return values_.at(i); }

    std::span<const double, kNumParams> values() const { return values_; }
    std::span<double, kNumParams> values() { return values_; }

    bool operator==(const ParameterSet&) const = default;

private:
    std::array<double, kNumParams> values_;
};

// Point estimates of the published hybrid model.
ParameterSet published_estimates();
// Cold-start values: zero betas, unit scales, loadings 1, deltas 0.5.
ParameterSet default_start_values();

// ---------------------------------------------------------------------------
// Dataset and draws

struct Dataset {
    std::vector<AttributeSpec> attributes = default_attributes();
    std::vector<ChoiceTask> design;
    std::vector<RespondentRecord> respondents;

    int n_blocks() const;
    // Tasks of one block ordered by task_id.
    std::vector<ChoiceTask> block_tasks(int block_id) const;
    // Throws ValidationError listing every violation found.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

enum class DrawScheme { PseudoRandom, Halton };

struct DrawConfig {
    int R = 500;
    DrawScheme scheme = DrawScheme::Halton;
    std::uint64_t seed = 0;
};

std::string_view to_string(DrawScheme s);
std::optional<DrawScheme> parse_scheme(std::string_view s);

}  // namespace hcm
