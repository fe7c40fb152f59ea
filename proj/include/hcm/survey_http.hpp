#pragma once

#include <memory>
#include <string>

#include "hcm/survey.hpp"

namespace hcm {

// HTTP+JSON front end of a SurveyService:
//   POST /api/session                 -> 201 session
//   GET  /api/questionnaire/{id}      -> 200 payload, 404 unknown
//   POST /api/response                -> 201 receipt (200 on a repeat), 400 field errors, 404, 409
//   GET  /api/export                  -> 200 application/zip
//   GET  /api/health                  -> 200 {"ready": bool}
class SurveyHttpServer {
public:
    explicit SurveyHttpServer(SurveyService& service);
    ~SurveyHttpServer();

    SurveyHttpServer(const SurveyHttpServer&) = delete;
    SurveyHttpServer& operator=(const SurveyHttpServer&) = delete;

    // Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); call after bind.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hcm
