#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "hcm/core.hpp"

namespace hcm {

// Schema violation in one of the bundle files. row is 1-based counting the
// header as row 1; 0 means the problem is not tied to a row.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t row, std::string column, const std::string& message);

    const std::string& file() const { return file_; }
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::string file_;
    std::size_t row_;
    std::string column_;
};

// Locations of the four CSV files (plus the optional attrs.json) that make up
// a dataset bundle.
struct DatasetPaths {
    std::filesystem::path design;
    std::filesystem::path respondents;
    std::filesystem::path likert;
    std::filesystem::path choices;
    std::filesystem::path attributes;

    static DatasetPaths in_directory(const std::filesystem::path& dir);
};

Dataset read_dataset(const DatasetPaths& paths);
void write_dataset(const Dataset& dataset, const DatasetPaths& paths);

// In-memory CSV renderings of the bundle, used by write_dataset and the
// survey export.
std::string design_csv(const std::vector<ChoiceTask>& design);
std::string respondents_csv(const std::vector<RespondentRecord>& respondents);
std::string likert_csv(const std::vector<RespondentRecord>& respondents);
std::string choices_csv(const std::vector<RespondentRecord>& respondents);
std::string attributes_json(const std::vector<AttributeSpec>& attributes);

struct LikertRow {
    std::string id;
    std::array<int, kStatements> scores{};
};

// likert.csv on its own, rows sorted by respondent id.
std::vector<LikertRow> read_likert(const std::filesystem::path& path);

std::vector<ChoiceTask> read_design(const std::filesystem::path& path);
std::vector<AttributeSpec> read_attributes(const std::filesystem::path& path);
std::vector<ChoiceTask> parse_design_csv(const std::string& text, const std::string& file_label);

// Shortest representation that parses back to the same double.
std::string format_number(double v);

ParameterSet read_params(const std::filesystem::path& path);
void write_params(const ParameterSet& params, const std::filesystem::path& path);
std::string params_json(const ParameterSet& params);
ParameterSet parse_params_json(const std::string& text, const std::string& file_label);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hcm
