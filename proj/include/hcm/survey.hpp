#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcm/core.hpp"
#include "json.hpp"

namespace hcm {

class ServiceNotReady : public Error {
public:
    using Error::Error;
};

class UnknownSession : public Error {
public:
    using Error::Error;
};

class SessionConflict : public Error {
public:
    using Error::Error;
};

class InvalidEnvelope : public Error {
public:
    explicit InvalidEnvelope(std::vector<std::string> field_errors);
    const std::vector<std::string>& field_errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

struct Session {
    std::string session_id;
    int block_id = 1;
    std::uint64_t sequence = 0;  // 1-based creation order
    std::string issued_at;
    bool completed = false;
};

struct Receipt {
    std::string session_id;
    std::string respondent_id;
    int block_id = 1;
    std::string received_at;
    std::string envelope_digest;
    bool duplicate = false;  // true when an identical envelope was already stored
};

// Fills a record from the four envelope sections. Type problems and record
// invariant violations are returned as "field: message" items; the record
// is only meaningful when the list is empty.
std::vector<std::string> parse_envelope(const nlohmann::json& envelope, int block_id, const std::string& id,
                                        RespondentRecord& out);

// Builds a well-formed envelope from a record (test and client helper).
nlohmann::json envelope_from_record(const RespondentRecord& record, const std::string& session_id,
                                    const std::string& submitted_at);

// 32 hex characters from a 128-bit random value.
std::string random_session_token();

struct SurveyConfig {
    std::vector<ChoiceTask> design;
    std::vector<AttributeSpec> attributes = default_attributes();
    // Expected number of blocks; 0 takes it from the design.
    int n_blocks = 0;
    std::filesystem::path data_dir;
    // Statement texts (content/statements.*.json); empty uses built-in labels.
    std::filesystem::path content_file;
    std::function<std::string()> token_generator = random_session_token;
    std::function<std::string()> clock;  // ISO-8601 timestamps; defaults to UTC now
};

// Block rotation, questionnaire payloads and durable response storage. All
// state lives in two append-only NDJSON logs under data_dir (sessions and
// responses) and is rebuilt from them on construction.
class SurveyService {
public:
    explicit SurveyService(SurveyConfig config);

    bool ready() const { return n_blocks_ > 0; }
    int n_blocks() const { return n_blocks_; }

    // Throws ServiceNotReady without a design.
    Session create_session();
    std::optional<Session> session(const std::string& session_id) const;
    std::size_t session_count() const;
    std::size_t response_count() const;

    // Throws UnknownSession.
    nlohmann::json questionnaire(const std::string& session_id) const;

    // Durably appends the response before returning. A repeat of the stored
    // envelope returns the original receipt; a different envelope for a
    // completed session throws SessionConflict.
    Receipt record_response(const nlohmann::json& envelope);

    std::vector<RespondentRecord> completed_records() const;
    // File name -> contents of the dataset bundle.
    std::map<std::string, std::string> export_bundle() const;
    std::string export_zip() const;

    // Rewrites both logs from the in-memory state via temp file + rename.
    void compact();

private:
    struct Stored {
        Receipt receipt;
        RespondentRecord record;
    };

    void replay();
    void compact_unlocked();
    void append_line(const std::filesystem::path& path, const std::string& line, bool sync);
    std::string now() const;

    SurveyConfig config_;
    int n_blocks_ = 0;
    std::map<int, std::vector<ChoiceTask>> blocks_;
    nlohmann::json statements_;

    mutable std::shared_mutex mutex_;
    std::vector<Session> sessions_;
    std::unordered_map<std::string, std::size_t> session_index_;
    std::vector<Stored> responses_;
    std::unordered_map<std::string, std::size_t> response_index_;
};

}  // namespace hcm
