#include "hcm/survey_http.hpp"

#include "httplib.h"

namespace hcm {

using nlohmann::json;

struct SurveyHttpServer::Impl {
    SurveyService& service;
    httplib::Server server;

    explicit Impl(SurveyService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<std::string>& errors = {}) {
    json body{{"error", message}};
    if (!errors.empty()) body["errors"] = errors;
    send_json(res, status, body);
}

json session_json(const Session& s) {
    return {{"session_id", s.session_id}, {"block_id", s.block_id}, {"issued_at", s.issued_at}};
}

json receipt_json(const Receipt& r) {
    return {{"session_id", r.session_id},
            {"respondent_id", r.respondent_id},
            {"block_id", r.block_id},
            {"received_at", r.received_at},
            {"envelope_digest", r.envelope_digest}};
}

}  // namespace

SurveyHttpServer::SurveyHttpServer(SurveyService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    SurveyService& svc = impl_->service;

    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    srv.Get("/api/health", [&svc](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"ready", svc.ready()}, {"blocks", svc.n_blocks()}});
    });

    srv.Post("/api/session", [&svc](const httplib::Request&, httplib::Response& res) {
        try {
            send_json(res, 201, session_json(svc.create_session()));
        } catch (const ServiceNotReady& e) {
            send_error(res, 503, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    srv.Get(R"(/api/questionnaire/([0-9A-Za-z_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, 200, svc.questionnaire(req.matches[1]));
        } catch (const UnknownSession& e) {
            send_error(res, 404, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    srv.Post("/api/response", [&svc](const httplib::Request& req, httplib::Response& res) {
        json envelope;
        try {
            envelope = json::parse(req.body);
        } catch (const json::exception&) {
            send_error(res, 400, "request body is not valid JSON");
            return;
        }
        try {
            const Receipt r = svc.record_response(envelope);
            send_json(res, r.duplicate ? 200 : 201, receipt_json(r));
        } catch (const InvalidEnvelope& e) {
            send_error(res, 400, "validation failed", e.field_errors());
        } catch (const UnknownSession& e) {
            send_error(res, 404, e.what());
        } catch (const SessionConflict& e) {
            send_error(res, 409, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    srv.Get("/api/export", [&svc](const httplib::Request&, httplib::Response& res) {
        try {
            res.set_header("Content-Disposition", "attachment; filename=\"dataset.zip\"");
            res.set_content(svc.export_zip(), "application/zip");
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });
}

SurveyHttpServer::~SurveyHttpServer() { stop(); }

int SurveyHttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void SurveyHttpServer::listen() { impl_->server.listen_after_bind(); }

void SurveyHttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace hcm
