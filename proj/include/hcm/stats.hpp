#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "hcm/core.hpp"

namespace hcm {

struct ImportanceRow {
    std::string attribute;  // cost, time, eco, flex
    double mean = 0.0;
    std::size_t count = 0;
    std::size_t missing = 0;
};

// Mean 4-point importance per attribute, sorted by mean descending (ties by
// attribute order). Respondents without a score are counted in `missing`.
std::vector<ImportanceRow> attribute_importance_summary(const Dataset& dataset);

inline constexpr std::array<std::string_view, 4> kAgeBandLabels = {"18-24", "25-34", "35-44", ">=45"};

struct RemunerationRow {
    std::string band;
    std::size_t n = 0;
    double supply_mean = 0.0;  // NaN when the band is empty
    double demand_mean = 0.0;
    double gap = 0.0;          // demand - supply
};

// Throws ValidationError if any remuneration lies outside [50, 120].
std::vector<RemunerationRow> remuneration_by_age(const Dataset& dataset);

struct ModalSplitGroup {
    bool car_in_household = false;
    std::size_t n = 0;
    std::array<double, 6> shares{};  // kAllModes order; all zero when n == 0
};

// Group without a car first, then car owners.
std::vector<ModalSplitGroup> cs_modal_split(const Dataset& dataset);

struct BoxStats {
    CsMode mode = CsMode::Car;
    std::size_t n = 0;
    double mean = 0.0, min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear interpolation between order statistics at h = (n - 1) p (inclusive
// method). values must be sorted and non-empty.
double quantile_inclusive(const std::vector<double>& sorted, double p);

// Modes with at least one respondent, in kAllModes order. Throws
// ValidationError for a detour outside [15, 60].
std::vector<BoxStats> detour_time_stats(const Dataset& dataset);

// Distance covered in mean_minutes at speed_kmh.
double detour_km(double speed_kmh, double mean_minutes);

struct Summary {
    std::size_t n_respondents = 0;
    std::vector<ImportanceRow> importance;
    std::vector<RemunerationRow> remuneration;
    std::vector<ModalSplitGroup> modal_split;
    std::vector<BoxStats> detour;
    double speed_kmh = 20.0;
};

Summary summarize(const Dataset& dataset, double speed_kmh = 20.0);
std::string summary_json(const Summary& summary);
std::string summary_text(const Summary& summary);
// File name -> CSV text, one per table.
std::map<std::string, std::string> summary_csv(const Summary& summary);

}  // namespace hcm
