#include "caric/server.hpp"

#include "caric/error.hpp"
#include "caric/image_io.hpp"
#include "caric/mesh_io.hpp"

#include <httplib.h>

#include <chrono>

namespace caric {

using nlohmann::json;

int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidMesh:
    case ErrorCode::TopologyMismatch: return 400;
    case ErrorCode::Unsnappable:
    case ErrorCode::MissingCurve:
    case ErrorCode::OutOfBounds:
    case ErrorCode::InsufficientRegion:
    case ErrorCode::CameraBehindMesh:
    case ErrorCode::ContractViolation: return 422;
    case ErrorCode::Cancelled: return 409;
    default: return 500;
    }
}

namespace {

std::vector<Eigen::Vector2d> points_from_json(const json& j)
{
    std::vector<Eigen::Vector2d> out;
    for (const auto& p : j)
        out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return out;
}

json parse_body(const httplib::Request& req)
{
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
}

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

FaceMesh mesh_from_upload(const std::string& obj, const std::string& sidecar)
{
    FaceMesh mesh;
    read_obj(obj, mesh.vertices, mesh.triangles);
    try {
        sidecar_from_json(json::parse(sidecar), mesh);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad mesh sidecar: ") + e.what());
    }
    mesh.validate();
    return mesh;
}

Raster photo_from_upload(const std::string& bytes)
{
    Raster photo = bytes.rfind("CRST", 0) == 0 ? decode_raster(bytes) : decode_image(bytes);
    if (photo.channels == 4) {
        Raster rgb(photo.width, photo.height, 3);
        for (std::size_t p = 0; p < photo.pixel_count(); ++p)
            for (int c = 0; c < 3; ++c)
                rgb.data[p * 3 + static_cast<std::size_t>(c)] = photo.data[p * 4 + static_cast<std::size_t>(c)];
        photo = std::move(rgb);
    }
    return photo;
}

} // namespace

struct ApiServer::Impl {
    ServerOptions options;
    SessionStore store;
    httplib::Server http;
    std::mutex cancel_mutex;
    std::map<std::string, std::shared_ptr<std::atomic<bool>>> cancel;

    explicit Impl(ServerOptions o) : options(std::move(o)), store(options.data_dir) {}

    std::shared_ptr<std::atomic<bool>> cancel_flag(const std::string& id)
    {
        std::lock_guard lock(cancel_mutex);
        auto& f = cancel[id];
        if (!f)
            f = std::make_shared<std::atomic<bool>>(false);
        return f;
    }

    // Runs a handler, mapping engine and JSON errors to status codes.
    template <class F>
    static httplib::Server::Handler wrap(F f)
    {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_json(res, {{"error", to_string(e.code())}, {"message", e.message()}}, http_status(e.code()));
            } catch (const json::exception& e) {
                send_json(res, {{"error", "invalid-argument"}, {"message", e.what()}}, 400);
            } catch (const std::exception& e) {
                send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
            }
        };
    }

    std::shared_ptr<Session> session(const httplib::Request& req) { return store.get(req.path_params.at("id")); }

    void routes()
    {
        http.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = store.next_id();
            std::shared_ptr<Session> s;
            if (req.is_multipart_form_data()) {
                for (const char* k : {"photo", "mesh", "sidecar", "camera"})
                    if (!req.has_file(k))
                        throw Error(ErrorCode::InvalidArgument, std::string("missing form field '") + k + "'");
                Raster photo = photo_from_upload(req.get_file_value("photo").content);
                const std::string sidecar = req.get_file_value("sidecar").content;
                FaceMesh mesh = mesh_from_upload(req.get_file_value("mesh").content, sidecar);
                FaceMesh neutral =
                    req.has_file("neutral") ? mesh_from_upload(req.get_file_value("neutral").content, sidecar) : mesh;
                const Camera camera = camera_from_json(json::parse(req.get_file_value("camera").content));
                SessionConfig config = options.config;
                if (req.has_file("config"))
                    config = config_from_json(json::parse(req.get_file_value("config").content));
                s = std::make_shared<Session>(id, std::move(photo), std::move(mesh), std::move(neutral), camera, config);
            } else {
                const json body = parse_body(req);
                if (!body.contains("demo"))
                    throw Error(ErrorCode::InvalidArgument, "expected multipart uploads or a 'demo' object");
                const json& d = body.at("demo");
                DemoConfig demo;
                demo.rows = d.value("rows", demo.rows);
                demo.cols = d.value("cols", demo.cols);
                demo.width = d.value("width", demo.width);
                demo.height = d.value("height", demo.height);
                demo.seed = d.value("seed", demo.seed);
                demo.expression.smile = d.value("smile", 0.0);
                demo.expression.jaw_open = d.value("jaw_open", 0.0);
                demo.expression.brow_raise = d.value("brow_raise", 0.0);
                const SessionConfig config =
                    body.contains("config") ? config_from_json(body.at("config")) : options.config;
                s = make_demo_session(id, demo, config);
            }
            store.add(s);
            send_json(res, {{"id", s->id()}, {"width", s->width()}, {"height", s->height()}}, 201);
        }));

        http.Get("/sessions/:id", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            send_json(res, {{"id", s->id()},
                            {"width", s->width()},
                            {"height", s->height()},
                            {"version", s->version()},
                            {"has_result", s->has_result()},
                            {"stage_runs", s->stage_runs()}});
        }));

        http.Get("/sessions/:id/sketch", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const View view = view_from_name(req.has_param("view") ? req.get_param_value("view") : "frontal");
            send_json(res, sketch_to_json(s->sketch(view)));
        }));

        http.Post("/sessions/:id/edits", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const json body = parse_body(req);
            const View view = view_from_name(body.value("view", std::string("frontal")));
            const EditPreview p = s->edit(edit_from_json(body), view);
            if (p.changed)
                store.persist(*s);
            json out = preview_to_json(p);
            out["version"] = s->version();
            send_json(res, out);
        }));

        http.Post("/sessions/:id/synthesize", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            auto flag = cancel_flag(s->id());
            flag->store(false);
            const auto t0 = std::chrono::steady_clock::now();
            s->synthesize(flag.get());
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            store.persist(*s);
            send_json(res, {{"version", s->version()},
                            {"elapsed_ms", ms},
                            {"stage_runs", s->stage_runs()},
                            {"stage_ms", s->stage_timings()}});
        }));

        http.Post("/sessions/:id/cancel", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.path_params.at("id");
            store.get(id);
            cancel_flag(id)->store(true);
            send_json(res, {{"cancelled", true}});
        }));

        http.Get("/sessions/:id/result", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const Raster r = s->result();
            if (req.has_param("format") && req.get_param_value("format") == "crst")
                res.set_content(encode_raster(r), "application/octet-stream");
            else
                res.set_content(encode_png(r), "image/png");
        }));

        http.Get("/sessions/:id/stages/:name", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto images = s->stage_images();
            const auto it = images.find(req.path_params.at("name"));
            if (it == images.end())
                throw Error(ErrorCode::NotFound, "no stage '" + req.path_params.at("name") + "'");
            res.set_content(encode_png(it->second, it->first == "alpha" ? Transfer::Linear : Transfer::Srgb),
                            "image/png");
        }));

        http.Post("/sessions/:id/ear-edit", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const json body = parse_body(req);
            s->ear_edit(points_from_json(body.at("boundary")), points_from_json(body.at("redrawn")));
            store.persist(*s);
            send_json(res, {{"ok", true}, {"stage_runs", s->stage_runs()}});
        }));

        http.Post("/sessions/:id/mouth-fill", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const json body = parse_body(req);
            s->mouth_fill(body.value("template", std::string("open")));
            store.persist(*s);
            send_json(res, {{"ok", true}, {"stage_runs", s->stage_runs()}});
        }));
    }
};

ApiServer::ApiServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options)))
{
    impl_->http.new_task_queue = [n = impl_->options.threads] {
        return new httplib::ThreadPool(static_cast<std::size_t>(std::max(1, n)));
    };
    impl_->http.set_payload_max_length(512u << 20);
    impl_->routes();
}

ApiServer::~ApiServer()
{
    stop();
}

int ApiServer::bind()
{
    const int port = impl_->options.port == 0 ? impl_->http.bind_to_any_port(impl_->options.host)
                                               : (impl_->http.bind_to_port(impl_->options.host, impl_->options.port)
                                                      ? impl_->options.port
                                                      : -1);
    if (port < 0)
        throw Error(ErrorCode::Io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    return port;
}

void ApiServer::run()
{
    impl_->http.listen_after_bind();
}

void ApiServer::stop()
{
    if (impl_)
        impl_->http.stop();
}

void ApiServer::wait_until_ready() const
{
    impl_->http.wait_until_ready();
}

SessionStore& ApiServer::store()
{
    return impl_->store;
}

} // namespace caric
