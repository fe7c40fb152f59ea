#include "hcm/survey.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "hcm/dataset_io.hpp"
#include "hcm/random.hpp"
#include "hcm/zip.hpp"

namespace hcm {

using nlohmann::json;

namespace {

const char* kSessionsLog = "sessions.ndjson";
const char* kResponsesLog = "responses.ndjson";

std::string join_errors(const std::vector<std::string>& errs) {
    std::string s = "invalid response";
    for (const auto& e : errs) s += "; " + e;
    return s;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string respondent_id_for(std::size_t ordinal) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "R%05zu", ordinal);
    return buf;
}

// Typed field readers that record a message instead of throwing.
class Reader {
public:
    Reader(const json& obj, std::string prefix, std::vector<std::string>& errs)
        : obj_(obj), prefix_(std::move(prefix)), errs_(errs) {}

    const json* field(const std::string& name) {
        if (!obj_.is_object() || !obj_.contains(name)) {
            errs_.push_back(prefix_ + name + ": missing");
            return nullptr;
        }
        return &obj_.at(name);
    }

    template <class T>
    void integer(const std::string& name, T& out) {
        const json* v = field(name);
        if (!v) return;
        if (v->is_number_integer()) {
            out = static_cast<T>(v->get<long long>());
        } else if (v->is_number_float() && std::floor(v->get<double>()) == v->get<double>()) {
            out = static_cast<T>(v->get<double>());
        } else {
            errs_.push_back(prefix_ + name + ": expected an integer");
        }
    }

    void number(const std::string& name, double& out) {
        const json* v = field(name);
        if (!v) return;
        if (v->is_number()) {
            out = v->get<double>();
        } else {
            errs_.push_back(prefix_ + name + ": expected a number");
        }
    }

    void boolean(const std::string& name, bool& out) {
        const json* v = field(name);
        if (!v) return;
        if (v->is_boolean()) {
            out = v->get<bool>();
        } else if (v->is_number_integer() && (v->get<int>() == 0 || v->get<int>() == 1)) {
            out = v->get<int>() == 1;
        } else {
            errs_.push_back(prefix_ + name + ": expected true/false");
        }
    }

    template <class E, class Parse>
    void enumeration(const std::string& name, E& out, Parse parse) {
        const json* v = field(name);
        if (!v) return;
        if (!v->is_string()) {
            errs_.push_back(prefix_ + name + ": expected a string");
            return;
        }
        auto e = parse(v->get<std::string>());
        if (!e) {
            errs_.push_back(prefix_ + name + ": unknown value '" + v->get<std::string>() + "'");
            return;
        }
        out = *e;
    }

private:
    const json& obj_;
    std::string prefix_;
    std::vector<std::string>& errs_;
};

const json& section(const json& env, const char* name, std::vector<std::string>& errs) {
    static const json empty = json::object();
    if (!env.is_object() || !env.contains(name) || !env.at(name).is_object()) {
        errs.push_back(std::string(name) + ": missing section");
        return empty;
    }
    return env.at(name);
}

json statement_texts(const std::filesystem::path& file) {
    json texts = json::object();
    if (!file.empty() && std::filesystem::exists(file)) {
        const json content = json::parse(read_text_file(file));
        return content;
    }
    for (std::size_t i = 0; i < kStatements; ++i) texts[statement_name(i)] = "Statement " + statement_name(i);
    return json{{"statements", texts}};
}

std::string cost_label(double uah) { return format_number(uah) + " UAH"; }

}  // namespace

InvalidEnvelope::InvalidEnvelope(std::vector<std::string> field_errors)
    : Error(join_errors(field_errors)), errors_(std::move(field_errors)) {}

std::vector<std::string> parse_envelope(const json& env, int block_id, const std::string& id,
                                        RespondentRecord& r) {
    std::vector<std::string> errs;
    if (!env.is_object()) return {"envelope: expected a JSON object"};
    r = RespondentRecord{};
    r.id = id;
    r.block_id = block_id;

    {
        Reader s1(section(env, "section1", errs), "", errs);
        s1.integer("age_years", r.age_years);
        s1.enumeration("gender", r.gender, parse_gender);
        s1.integer("household_size", r.household_size);
        s1.integer("n_children", r.n_children);
        s1.boolean("car_in_household", r.car_in_household);
        s1.number("income_uah_month", r.income_uah_month);
        s1.enumeration("employment", r.employment, parse_employment);
        s1.boolean("education_high", r.education_high);
    }
    {
        const json& s2 = section(env, "section2", errs);
        if (s2.is_object() && s2.contains("likert") && s2.at("likert").is_object()) {
            Reader lk(s2.at("likert"), "likert.", errs);
            for (std::size_t i = 0; i < kStatements; ++i) {
                r.likert[i] = 0;
                lk.integer(statement_name(i), r.likert[i]);
            }
        } else if (env.contains("section2")) {
            errs.push_back("likert: missing");
        }
    }
    {
        const json& s3 = section(env, "section3", errs);
        if (s3.is_object() && s3.contains("choices") && s3.at("choices").is_array()) {
            std::size_t t = 0;
            for (const auto& c : s3.at("choices")) {
                ++t;
                std::optional<Choice> ch;
                if (c.is_string()) ch = parse_choice(c.get<std::string>());
                if (!ch) {
                    errs.push_back("choices." + std::to_string(t) + ": expected CS, CC or STORE");
                    continue;
                }
                r.choices.push_back(*ch);
            }
        } else if (env.contains("section3")) {
            errs.push_back("choices: missing");
        }
    }
    {
        const json& s4obj = section(env, "section4", errs);
        Reader s4(s4obj, "", errs);
        s4.number("remuneration_supply_uah", r.supply.remuneration_uah);
        s4.number("remuneration_demand_uah", r.demand_remuneration_uah);
        s4.enumeration("cs_mode", r.supply.cs_mode, parse_mode);
        s4.number("detour_min", r.supply.detour_min);
        if (s4obj.is_object() && s4obj.contains("importance")) {
            const json& imp = s4obj.at("importance");
            if (!imp.is_object()) {
                errs.push_back("importance: expected an object");
            } else {
                for (std::size_t i = 0; i < kImportanceItems; ++i) {
                    const std::string key(kImportanceNames[i]);
                    if (!imp.contains(key) || imp.at(key).is_null()) continue;
                    int v = 0;
                    Reader(imp, "importance.", errs).integer(key, v);
                    r.importance[i] = v;
                }
            }
        }
    }
    // Type errors first; invariant checks only on fields that parsed.
    for (auto& e : check_respondent(r)) {
        const std::string field = e.substr(0, e.find(':'));
        bool already = false;
        for (const auto& prior : errs)
            if (prior.rfind(field + ":", 0) == 0) already = true;
        if (!already) errs.push_back(std::move(e));
    }
    return errs;
}

json envelope_from_record(const RespondentRecord& r, const std::string& session_id,
                          const std::string& submitted_at) {
    json likert = json::object();
    for (std::size_t i = 0; i < kStatements; ++i) likert[statement_name(i)] = r.likert[i];
    json choices = json::array();
    for (auto c : r.choices) choices.push_back(std::string(to_string(c)));
    json importance = json::object();
    for (std::size_t i = 0; i < kImportanceItems; ++i)
        if (r.importance[i]) importance[std::string(kImportanceNames[i])] = *r.importance[i];
    return json{
        {"session_id", session_id},
        {"submitted_at", submitted_at},
        {"section1",
         {{"age_years", r.age_years},
          {"gender", std::string(to_string(r.gender))},
          {"household_size", r.household_size},
          {"n_children", r.n_children},
          {"car_in_household", r.car_in_household},
          {"income_uah_month", r.income_uah_month},
          {"employment", std::string(to_string(r.employment))},
          {"education_high", r.education_high}}},
        {"section2", {{"likert", likert}}},
        {"section3", {{"choices", choices}}},
        {"section4",
         {{"remuneration_supply_uah", r.supply.remuneration_uah},
          {"remuneration_demand_uah", r.demand_remuneration_uah},
          {"cs_mode", std::string(to_string(r.supply.cs_mode))},
          {"detour_min", r.supply.detour_min},
          {"importance", importance}}},
    };
}

std::string random_session_token() {
    static std::mutex m;
    static std::random_device rd;
    std::lock_guard lock(m);
    std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    return hex64(hi) + hex64(lo);
}

SurveyService::SurveyService(SurveyConfig config) : config_(std::move(config)) {
    if (!config_.clock) config_.clock = utc_now;
    if (!config_.token_generator) config_.token_generator = random_session_token;
    if (config_.data_dir.empty()) throw ValidationError("survey data directory is required");
    std::filesystem::create_directories(config_.data_dir);
    statements_ = statement_texts(config_.content_file);

    if (!config_.design.empty()) {
        Dataset probe;
        probe.design = config_.design;
        for (const auto& t : probe.design) validate_task(t);
        const int B = probe.n_blocks();
        if (config_.n_blocks > 0 && config_.n_blocks != B)
            throw ValidationError("design has " + std::to_string(B) + " blocks, expected " +
                                  std::to_string(config_.n_blocks));
        for (int b = 1; b <= B; ++b) {
            auto tasks = probe.block_tasks(b);
            if (tasks.size() != static_cast<std::size_t>(kTasksPerRespondent))
                throw ValidationError("block " + std::to_string(b) + " has " + std::to_string(tasks.size()) +
                                      " tasks, expected " + std::to_string(kTasksPerRespondent));
            blocks_[b] = std::move(tasks);
        }
        n_blocks_ = B;
    }
    replay();
}

std::string SurveyService::now() const { return config_.clock(); }

void SurveyService::append_line(const std::filesystem::path& path, const std::string& line, bool sync) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));
    const std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            throw Error("cannot append to " + path.string() + ": " + std::strerror(err));
        }
        off += static_cast<std::size_t>(n);
    }
    if (sync && ::fsync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        throw Error("cannot sync " + path.string() + ": " + std::strerror(err));
    }
    ::close(fd);
}

void SurveyService::replay() {
    bool damaged = false;
    auto lines = [&](const char* name) {
        std::vector<json> out;
        std::ifstream in(config_.data_dir / name);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                out.push_back(json::parse(line));
            } catch (const json::exception&) {
                // A torn final write from a crash; the record was never receipted.
                damaged = true;
            }
        }
        return out;
    };
    for (const auto& j : lines(kSessionsLog)) {
        Session s;
        s.session_id = j.at("session_id").get<std::string>();
        s.block_id = j.at("block_id").get<int>();
        s.sequence = j.at("sequence").get<std::uint64_t>();
        s.issued_at = j.value("issued_at", "");
        session_index_[s.session_id] = sessions_.size();
        sessions_.push_back(std::move(s));
    }
    for (const auto& j : lines(kResponsesLog)) {
        Stored st;
        st.receipt.session_id = j.at("session_id").get<std::string>();
        st.receipt.respondent_id = j.at("respondent_id").get<std::string>();
        st.receipt.block_id = j.at("block_id").get<int>();
        st.receipt.received_at = j.value("received_at", "");
        st.receipt.envelope_digest = j.at("envelope_digest").get<std::string>();
        const auto errs = parse_envelope(j.at("envelope"), st.receipt.block_id, st.receipt.respondent_id, st.record);
        if (!errs.empty()) throw Error("response log holds an invalid record for " + st.receipt.session_id);
        auto it = session_index_.find(st.receipt.session_id);
        if (it != session_index_.end()) sessions_[it->second].completed = true;
        response_index_[st.receipt.session_id] = responses_.size();
        responses_.push_back(std::move(st));
    }
    if (damaged) compact_unlocked();
}

Session SurveyService::create_session() {
    if (!ready()) throw ServiceNotReady("no design loaded");
    std::unique_lock lock(mutex_);
    Session s;
    do {
        s.session_id = config_.token_generator();
    } while (session_index_.count(s.session_id));
    s.sequence = sessions_.size() + 1;
    s.block_id = static_cast<int>((s.sequence - 1) % static_cast<std::uint64_t>(n_blocks_)) + 1;
    s.issued_at = now();
    const json line{{"session_id", s.session_id},
                    {"block_id", s.block_id},
                    {"sequence", s.sequence},
                    {"issued_at", s.issued_at}};
    append_line(config_.data_dir / kSessionsLog, line.dump(), true);
    session_index_[s.session_id] = sessions_.size();
    sessions_.push_back(s);
    return s;
}

std::optional<Session> SurveyService::session(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = session_index_.find(id);
    if (it == session_index_.end()) return std::nullopt;
    return sessions_[it->second];
}

std::size_t SurveyService::session_count() const {
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

std::size_t SurveyService::response_count() const {
    std::shared_lock lock(mutex_);
    return responses_.size();
}

json SurveyService::questionnaire(const std::string& id) const {
    const auto s = session(id);
    if (!s) throw UnknownSession("unknown session " + id);

    json income = json::array();
    const std::array<const char*, 7> income_labels = {"< 5,000",         "5,000 - 9,999",   "10,000 - 19,999",
                                                      "20,000 - 29,999", "30,000 - 39,999", "40,000 - 49,999",
                                                      ">= 50,000"};
    for (std::size_t i = 0; i < kIncomeBandMidpoints.size(); ++i)
        income.push_back({{"value", kIncomeBandMidpoints[i]}, {"label", std::string(income_labels[i]) + " UAH"}});
    json employment = json::array();
    for (auto e : {Employment::Full, Employment::Part, Employment::Unemployed, Employment::Housekeeper,
                   Employment::Student})
        employment.push_back(std::string(to_string(e)));
    json section1 = {
        {"id", 1},
        {"title", "About you"},
        {"fields",
         json::array({
             {{"name", "age_years"}, {"type", "integer"}, {"min", 18}},
             {{"name", "gender"}, {"type", "enum"}, {"options", {"female", "male"}}},
             {{"name", "household_size"}, {"type", "integer"}, {"min", 1}},
             {{"name", "n_children"}, {"type", "integer"}, {"min", 0}},
             {{"name", "car_in_household"}, {"type", "boolean"}},
             {{"name", "income_uah_month"}, {"type", "choice"}, {"options", income}},
             {{"name", "employment"}, {"type", "enum"}, {"options", employment}},
             {{"name", "education_high"}, {"type", "boolean"}},
         })}};

    json statements = json::array();
    const json texts = statements_.value("statements", json::object());
    for (std::size_t i = 0; i < kStatements; ++i) {
        const auto name = statement_name(i);
        statements.push_back({{"id", name}, {"text", texts.value(name, name)}});
    }
    json section2 = {{"id", 2},
                     {"title", "Attitudes"},
                     {"scale", {{"min", 1}, {"max", 5}, {"labels", statements_.value("scale", json::array())}}},
                     {"statements", statements}};

    json tasks = json::array();
    for (const auto& t : blocks_.at(s->block_id)) {
        json cs = {{"id", "CS"},
                   {"label", "Online crowd-shipping carrier"},
                   {"attributes",
                    json::array({
                        {{"name", "cost"}, {"value", t.cs_cost}, {"label", cost_label(t.cs_cost)}},
                        {{"name", "time"}, {"value", t.cs_time}, {"label", time_level_label(Channel::CS, t.cs_time)}},
                        {{"name", "eco"}, {"value", t.cs_co2}, {"label", t.cs_co2 ? "Reduction of CO2" : "No reduction of CO2"}},
                        {{"name", "flex"}, {"value", t.cs_flex}, {"label", t.cs_flex ? "YES" : "NO"}},
                    })}};
        json cc = {{"id", "CC"},
                   {"label", "Online commercial carrier"},
                   {"attributes",
                    json::array({
                        {{"name", "cost"}, {"value", t.cc_cost}, {"label", cost_label(t.cc_cost)}},
                        {{"name", "time"}, {"value", t.cc_time}, {"label", time_level_label(Channel::CC, t.cc_time)}},
                        {{"name", "eco"}, {"value", 0}, {"label", "No reduction of CO2"}},
                        {{"name", "flex"}, {"value", 0}, {"label", "NO"}},
                    })}};
        json store = {{"id", "STORE"}, {"label", "Physical store"}, {"attributes", json::array()}};
        tasks.push_back({{"task_id", t.task_id}, {"alternatives", json::array({cc, cs, store})}});
    }
    json section3 = {{"id", 3},
                     {"title", "Choice tasks"},
                     {"attribute_rows", {"cost", "time", "eco", "flex"}},
                     {"tasks", tasks}};

    json modes = json::array();
    for (auto m : kAllModes) modes.push_back(std::string(to_string(m)));
    json importance = json::array();
    const json imp_texts = statements_.value("importance_items", json::object());
    for (auto name : kImportanceNames)
        importance.push_back({{"name", std::string(name)}, {"text", imp_texts.value(std::string(name), std::string(name))}});
    json section4 = {
        {"id", 4},
        {"title", "Delivery by crowd couriers"},
        {"fields",
         json::array({
             {{"name", "remuneration_supply_uah"}, {"type", "number"}, {"min", 50}, {"max", 120}, {"unit", "UAH"}},
             {{"name", "remuneration_demand_uah"}, {"type", "number"}, {"min", 50}, {"max", 120}, {"unit", "UAH"}},
             {{"name", "cs_mode"}, {"type", "enum"}, {"options", modes}},
             {{"name", "detour_min"}, {"type", "number"}, {"min", 15}, {"max", 60}, {"unit", "min"}},
         })},
        {"importance", {{"scale", {{"min", 1}, {"max", 4}}}, {"items", importance}}}};

    return json{{"session_id", s->session_id},
                {"block_id", s->block_id},
                {"sections", json::array({section1, section2, section3, section4})}};
}

Receipt SurveyService::record_response(const json& envelope) {
    if (!envelope.is_object() || !envelope.contains("session_id") || !envelope.at("session_id").is_string())
        throw InvalidEnvelope({"session_id: missing"});
    const std::string sid = envelope.at("session_id").get<std::string>();
    json body = envelope;
    body.erase("submitted_at");
    const std::string digest = hex64(fnv1a(body.dump()));

    std::unique_lock lock(mutex_);
    auto sit = session_index_.find(sid);
    if (sit == session_index_.end()) throw UnknownSession("unknown session " + sid);
    if (auto rit = response_index_.find(sid); rit != response_index_.end()) {
        const Receipt& prior = responses_[rit->second].receipt;
        if (prior.envelope_digest == digest) {
            Receipt again = prior;
            again.duplicate = true;
            return again;
        }
        throw SessionConflict("session " + sid + " already completed");
    }

    Stored st;
    st.receipt.session_id = sid;
    st.receipt.respondent_id = respondent_id_for(responses_.size() + 1);
    st.receipt.block_id = sessions_[sit->second].block_id;
    st.receipt.envelope_digest = digest;
    auto errs = parse_envelope(envelope, st.receipt.block_id, st.receipt.respondent_id, st.record);
    if (!errs.empty()) throw InvalidEnvelope(std::move(errs));
    st.receipt.received_at = now();

    const json line{{"session_id", sid},
                    {"respondent_id", st.receipt.respondent_id},
                    {"block_id", st.receipt.block_id},
                    {"received_at", st.receipt.received_at},
                    {"envelope_digest", digest},
                    {"envelope", envelope}};
    append_line(config_.data_dir / kResponsesLog, line.dump(), true);
    sessions_[sit->second].completed = true;
    response_index_[sid] = responses_.size();
    responses_.push_back(std::move(st));
    return responses_.back().receipt;
}

std::vector<RespondentRecord> SurveyService::completed_records() const {
    std::shared_lock lock(mutex_);
    std::vector<RespondentRecord> out;
    out.reserve(responses_.size());
    for (const auto& s : responses_) out.push_back(s.record);
    return out;
}

std::map<std::string, std::string> SurveyService::export_bundle() const {
    const auto records = completed_records();
    return {{"design.csv", design_csv(config_.design)},
            {"respondents.csv", respondents_csv(records)},
            {"likert.csv", likert_csv(records)},
            {"choices.csv", choices_csv(records)},
            {"attrs.json", attributes_json(config_.attributes)}};
}

std::string SurveyService::export_zip() const { return make_stored_zip(export_bundle()); }

void SurveyService::compact() {
    std::unique_lock lock(mutex_);
    compact_unlocked();
}

void SurveyService::compact_unlocked() {
    auto rewrite = [&](const char* name, const std::vector<std::string>& lines) {
        const auto target = config_.data_dir / name;
        const auto tmp = config_.data_dir / (std::string(name) + ".tmp");
        std::filesystem::remove(tmp);
        for (const auto& l : lines) append_line(tmp, l, false);
        const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0644);
        if (fd >= 0) {
            ::fsync(fd);
            ::close(fd);
        }
        std::filesystem::rename(tmp, target);
    };
    std::vector<std::string> s_lines, r_lines;
    for (const auto& s : sessions_)
        s_lines.push_back(json{{"session_id", s.session_id},
                               {"block_id", s.block_id},
                               {"sequence", s.sequence},
                               {"issued_at", s.issued_at}}
                              .dump());
    std::ifstream in(config_.data_dir / kResponsesLog);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (json::accept(line)) r_lines.push_back(line);
    }
    in.close();
    rewrite(kSessionsLog, s_lines);
    rewrite(kResponsesLog, r_lines);
}

}  // namespace hcm
