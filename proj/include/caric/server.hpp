#pragma once

#include "caric/error.hpp"
#include "caric/pipeline.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace caric {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;               // 0 picks a free port
    std::filesystem::path data_dir; // empty keeps sessions in memory only
    SessionConfig config;
    int threads = 8;
};

/// JSON API over the session store. Routes:
///   POST /sessions                      multipart (photo, mesh, sidecar, camera[, neutral]) or {"demo": {...}}
///   GET  /sessions/{id}                 summary
///   GET  /sessions/{id}/sketch?view=    current sketch of the view
///   POST /sessions/{id}/edits           {"view", "curve", "s0", "s1", "replacement"}
///   POST /sessions/{id}/synthesize
///   POST /sessions/{id}/cancel
///   GET  /sessions/{id}/result          PNG, or the raster container with ?format=crst
///   GET  /sessions/{id}/stages/{name}   PNG of one dumped intermediate
///   POST /sessions/{id}/ear-edit        {"boundary": [[x, y], ...], "redrawn": [...]}
///   POST /sessions/{id}/mouth-fill      {"template": "closed" | "open" | "teeth"}
/// Errors come back as {"error": code, "message": text}.
class ApiServer {
public:
    explicit ApiServer(ServerOptions options);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and returns the port; run() then serves until stop().
    int bind();
    void run();
    void stop();
    void wait_until_ready() const;

    SessionStore& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP status for an engine error code.
int http_status(ErrorCode code);

} // namespace caric
