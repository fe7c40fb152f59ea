#include "hcm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hcm/dataset_io.hpp"
#include "json.hpp"

namespace hcm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sorting first makes the sum independent of record order.
double sorted_mean(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

nlohmann::ordered_json num(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

std::string fixed(double v, int digits = 2) {
    if (std::isnan(v)) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string csv_num(double v) { return std::isnan(v) ? "" : format_number(v); }

}  // namespace

std::vector<ImportanceRow> attribute_importance_summary(const Dataset& ds) {
    std::vector<ImportanceRow> rows;
    for (std::size_t i = 0; i < kImportanceItems; ++i) {
        ImportanceRow row;
        row.attribute = std::string(kImportanceNames[i]);
        std::vector<double> v;
        for (const auto& r : ds.respondents) {
            const auto& s = r.importance[i];
            if (!s) {
                ++row.missing;
                continue;
            }
            if (*s < 1 || *s > 4)
                throw ValidationError("respondent " + r.id + " importance_" + row.attribute + ": out of range 1..4");
            v.push_back(*s);
        }
        row.count = v.size();
        row.mean = sorted_mean(std::move(v));
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ImportanceRow& a, const ImportanceRow& b) {
        const double x = std::isnan(a.mean) ? -1.0 : a.mean, y = std::isnan(b.mean) ? -1.0 : b.mean;
        return x > y;
    });
    return rows;
}

static std::size_t band_of(int age) {
    if (age <= 24) return 0;
    if (age <= 34) return 1;
    if (age <= 44) return 2;
    return 3;
}

std::vector<RemunerationRow> remuneration_by_age(const Dataset& ds) {
    std::array<std::vector<double>, 4> supply, demand;
    for (const auto& r : ds.respondents) {
        const double s = r.supply.remuneration_uah, d = r.demand_remuneration_uah;
        if (!(s >= 50.0 && s <= 120.0))
            throw ValidationError("respondent " + r.id + " remuneration_supply_uah: out of range 50..120");
        if (!(d >= 50.0 && d <= 120.0))
            throw ValidationError("respondent " + r.id + " remuneration_demand_uah: out of range 50..120");
        const std::size_t b = band_of(r.age_years);
        supply[b].push_back(s);
        demand[b].push_back(d);
    }
    std::vector<RemunerationRow> rows;
    for (std::size_t b = 0; b < 4; ++b) {
        RemunerationRow row;
        row.band = std::string(kAgeBandLabels[b]);
        row.n = supply[b].size();
        row.supply_mean = sorted_mean(supply[b]);
        row.demand_mean = sorted_mean(demand[b]);
        row.gap = row.demand_mean - row.supply_mean;
        rows.push_back(row);
    }
    return rows;
}

std::vector<ModalSplitGroup> cs_modal_split(const Dataset& ds) {
    std::array<std::array<std::size_t, 6>, 2> counts{};
    std::array<std::size_t, 2> totals{};
    for (const auto& r : ds.respondents) {
        const std::size_t g = r.car_in_household ? 1 : 0;
        const auto m = static_cast<std::size_t>(r.supply.cs_mode);
        ++counts[g][m];
        ++totals[g];
    }
    std::vector<ModalSplitGroup> out;
    for (std::size_t g = 0; g < 2; ++g) {
        ModalSplitGroup grp;
        grp.car_in_household = g == 1;
        grp.n = totals[g];
        for (std::size_t m = 0; m < 6; ++m)
            grp.shares[m] = totals[g] ? static_cast<double>(counts[g][m]) / static_cast<double>(totals[g]) : 0.0;
        out.push_back(grp);
    }
    return out;
}

double quantile_inclusive(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<BoxStats> detour_time_stats(const Dataset& ds) {
    std::array<std::vector<double>, 6> by_mode;
    for (const auto& r : ds.respondents) {
        const double d = r.supply.detour_min;
        if (!(d >= 15.0 && d <= 60.0))
            throw ValidationError("respondent " + r.id + " detour_min: out of range 15..60");
        by_mode[static_cast<std::size_t>(r.supply.cs_mode)].push_back(d);
    }
    std::vector<BoxStats> out;
    for (std::size_t m = 0; m < 6; ++m) {
        auto& v = by_mode[m];
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        BoxStats b;
        b.mode = kAllModes[m];
        b.n = v.size();
        b.mean = sorted_mean(v);
        b.min = v.front();
        b.max = v.back();
        b.q1 = quantile_inclusive(v, 0.25);
        b.median = quantile_inclusive(v, 0.5);
        b.q3 = quantile_inclusive(v, 0.75);
        out.push_back(b);
    }
    return out;
}

double detour_km(double speed_kmh, double mean_minutes) { return speed_kmh * mean_minutes / 60.0; }

Summary summarize(const Dataset& ds, double speed_kmh) {
    Summary s;
    s.n_respondents = ds.respondents.size();
    s.importance = attribute_importance_summary(ds);
    s.remuneration = remuneration_by_age(ds);
    s.modal_split = cs_modal_split(ds);
    s.detour = detour_time_stats(ds);
    s.speed_kmh = speed_kmh;
    return s;
}

std::string summary_json(const Summary& s) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["n_respondents"] = s.n_respondents;
    ojson imp = ojson::array();
    for (const auto& r : s.importance)
        imp.push_back({{"attribute", r.attribute}, {"mean", num(r.mean)}, {"count", r.count}, {"missing", r.missing}});
    j["attribute_importance"] = imp;
    ojson rem = ojson::array();
    for (const auto& r : s.remuneration)
        rem.push_back({{"age_band", r.band},
                       {"n", r.n},
                       {"supply_mean", num(r.supply_mean)},
                       {"demand_mean", num(r.demand_mean)},
                       {"demand_minus_supply", num(r.gap)}});
    j["remuneration_by_age"] = rem;
    ojson split = ojson::array();
    for (const auto& g : s.modal_split) {
        ojson shares = ojson::object();
        for (std::size_t m = 0; m < 6; ++m) shares[std::string(to_string(kAllModes[m]))] = g.shares[m];
        split.push_back({{"car_in_household", g.car_in_household}, {"n", g.n}, {"shares", shares}});
    }
    j["cs_modal_split"] = split;
    ojson det = ojson::array();
    for (const auto& b : s.detour)
        det.push_back({{"mode", std::string(to_string(b.mode))},
                       {"n", b.n},
                       {"mean", b.mean},
                       {"min", b.min},
                       {"q1", b.q1},
                       {"median", b.median},
                       {"q3", b.q3},
                       {"max", b.max},
                       {"detour_km", detour_km(s.speed_kmh, b.mean)}});
    j["detour_time"] = det;
    j["speed_kmh"] = s.speed_kmh;
    return j.dump(2) + "\n";
}

std::string summary_text(const Summary& s) {
    std::ostringstream os;
    os << "Respondents: " << s.n_respondents << "\n\n";
    os << "Attribute importance (1-4)\n";
    for (const auto& r : s.importance)
        os << "  " << std::left << std::setw(8) << r.attribute << std::right << std::setw(6) << fixed(r.mean)
           << "  n=" << r.count << (r.missing ? "  missing=" + std::to_string(r.missing) : "") << "\n";
    os << "\nRemuneration by age, UAH (supply / demand / gap)\n";
    for (const auto& r : s.remuneration)
        os << "  " << std::left << std::setw(8) << r.band << std::right << std::setw(8) << fixed(r.supply_mean)
           << std::setw(8) << fixed(r.demand_mean) << std::setw(8) << fixed(r.gap) << "  n=" << r.n << "\n";
    os << "\nMode for CS deliveries\n";
    for (const auto& g : s.modal_split) {
        os << "  " << (g.car_in_household ? "car in household" : "no car") << " (n=" << g.n << ")\n";
        for (std::size_t m = 0; m < 6; ++m)
            os << "    " << std::left << std::setw(14) << to_string(kAllModes[m]) << std::right << std::setw(7)
               << fixed(100.0 * g.shares[m], 1) << "%\n";
    }
    os << "\nDetour time, min (mean / min / q1 / median / q3 / max / km at " << fixed(s.speed_kmh, 0)
       << " km/h)\n";
    for (const auto& b : s.detour)
        os << "  " << std::left << std::setw(14) << to_string(b.mode) << std::right << std::setw(7)
           << fixed(b.mean, 1) << std::setw(6) << fixed(b.min, 1) << std::setw(6) << fixed(b.q1, 1)
           << std::setw(6) << fixed(b.median, 1) << std::setw(6) << fixed(b.q3, 1) << std::setw(6)
           << fixed(b.max, 1) << std::setw(7) << fixed(detour_km(s.speed_kmh, b.mean), 1) << "  n=" << b.n
           << "\n";
    return os.str();
}

std::map<std::string, std::string> summary_csv(const Summary& s) {
    std::map<std::string, std::string> files;
    std::string imp = "attribute,mean,count,missing\n";
    for (const auto& r : s.importance)
        imp += r.attribute + "," + csv_num(r.mean) + "," + std::to_string(r.count) + "," +
               std::to_string(r.missing) + "\n";
    files["importance.csv"] = imp;
    std::string rem = "age_band,n,supply_mean,demand_mean,demand_minus_supply\n";
    for (const auto& r : s.remuneration)
        rem += r.band + "," + std::to_string(r.n) + "," + csv_num(r.supply_mean) + "," + csv_num(r.demand_mean) +
               "," + csv_num(r.gap) + "\n";
    files["remuneration.csv"] = rem;
    std::string split = "car_in_household,mode,share\n";
    for (const auto& g : s.modal_split)
        for (std::size_t m = 0; m < 6; ++m)
            split += std::string(g.car_in_household ? "1" : "0") + "," + std::string(to_string(kAllModes[m])) +
                     "," + csv_num(g.shares[m]) + "\n";
    files["modal_split.csv"] = split;
    std::string det = "mode,n,mean,min,q1,median,q3,max\n";
    for (const auto& b : s.detour)
        det += std::string(to_string(b.mode)) + "," + std::to_string(b.n) + "," + csv_num(b.mean) + "," +
               csv_num(b.min) + "," + csv_num(b.q1) + "," + csv_num(b.median) + "," + csv_num(b.q3) + "," +
               csv_num(b.max) + "\n";
    files["detour.csv"] = det;
    return files;
}

}  // namespace hcm
