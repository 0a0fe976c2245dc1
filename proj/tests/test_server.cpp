#include <doctest.h>

#include "caric/image_io.hpp"
#include "caric/mesh_io.hpp"
#include "caric/server.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"

#include <httplib.h>

#include <filesystem>
#include <numbers>
#include <thread>

using namespace caric;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Server on a free port in a background thread.
struct Running {
    ApiServer server;
    int port = 0;
    std::thread thread;

    explicit Running(ServerOptions o) : server(std::move(o))
    {
        port = server.bind();
        thread = std::thread([this] { server.run(); });
        server.wait_until_ready();
    }
    ~Running()
    {
        server.stop();
        thread.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(120, 0);
        return c;
    }
};

ServerOptions options(const fs::path& dir)
{
    ServerOptions o;
    o.port = 0;
    o.data_dir = dir;
    return o;
}

const json kDemo = {{"demo", {{"rows", 32}, {"cols", 32}, {"width", 320}, {"height", 320}, {"jaw_open", 0.5}}}};

json bumped_edit(const json& sketch, const std::string& name, double s0, double s1, double bump)
{
    for (const auto& c : sketch.at("curves"))
        if (c.at("name") == name) {
            SketchCurve curve;
            for (const auto& p : c.at("points"))
                curve.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            curve.params = c.at("params").get<std::vector<double>>();
            json pts = json::array();
            for (int k = 0; k <= 16; ++k) {
                const double t = s0 + (s1 - s0) * k / 16.0;
                const Eigen::Vector2d q = curve.at(t) + Eigen::Vector2d(0.0, bump * std::sin(std::numbers::pi * k / 16.0));
                pts.push_back({q.x(), q.y()});
            }
            return {{"curve", name}, {"s0", s0}, {"s1", s1}, {"replacement", pts}};
        }
    return {};
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("caric_server_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("HTTP session round trip: sketch, edit, synthesize, result, post edits")
{
    const fs::path dir = scratch("roundtrip");
    std::string id;
    {
        Running srv(options(dir));
        auto cli = srv.client();

        auto created = cli.Post("/sessions", kDemo.dump(), "application/json");
        REQUIRE(created);
        REQUIRE(created->status == 201);
        id = json::parse(created->body).at("id").get<std::string>();
        const std::string base = "/sessions/" + id;

        auto front = cli.Get(base + "/sketch?view=frontal");
        REQUIRE(front->status == 200);
        const json sketch = json::parse(front->body);
        CHECK(sketch.at("view") == "frontal");
        auto side = cli.Get(base + "/sketch?view=side");
        CHECK(json::parse(side->body).at("view") == "side");
        CHECK(cli.Get(base + "/sketch?view=top")->status == 400);
        CHECK(cli.Get("/sessions/nope/sketch")->status == 404);

        // result before synthesis
        CHECK(cli.Get(base + "/result")->status == 404);

        // unsnappable redraw is rejected and changes nothing
        json far = bumped_edit(sketch, "mouth", 0.2, 0.8, 0.0);
        for (auto& p : far.at("replacement"))
            p[1] = p[1].get<double>() + 60.0;
        auto bad = cli.Post(base + "/edits", far.dump(), "application/json");
        CHECK(bad->status == 422);
        CHECK(json::parse(bad->body).at("error") == "unsnappable-edit");
        CHECK(json::parse(cli.Get(base)->body).at("version") == 0);

        json edit = bumped_edit(sketch, "mouth", 0.2, 0.8, 6.0);
        edit["view"] = "frontal";
        auto edited = cli.Post(base + "/edits", edit.dump(), "application/json");
        REQUIRE(edited->status == 200);
        const json preview = json::parse(edited->body);
        CHECK(preview.at("changed") == true);
        CHECK(preview.at("max_station_error_px").get<double>() < 1.0);
        CHECK(preview.at("version") == 1);
        CHECK(preview.at("projection").size() == 32u * 32u);

        auto synth = cli.Post(base + "/synthesize", "", "application/json");
        REQUIRE(synth->status == 200);
        CHECK(json::parse(synth->body).at("stage_runs").at("reshade") == 1);

        auto png = cli.Get(base + "/result");
        REQUIRE(png->status == 200);
        CHECK(png->get_header_value("Content-Type") == "image/png");
        const Raster img = decode_image(png->body);
        CHECK(img.width == 320);
        CHECK(img.height == 320);
        auto crst = cli.Get(base + "/result?format=crst");
        CHECK(decode_raster(crst->body).channels == 3);
        CHECK(cli.Get(base + "/stages/alpha")->status == 200);
        CHECK(cli.Get(base + "/stages/nothing")->status == 404);

        auto mouth = cli.Post(base + "/mouth-fill", json{{"template", "open"}}.dump(), "application/json");
        CHECK(mouth->status == 200);
        CHECK(cli.Post(base + "/mouth-fill", json{{"template", "whistle"}}.dump(), "application/json")->status == 400);

        json ear = {{"boundary", json::array()}, {"redrawn", json::array()}};
        for (const auto& c : sketch.at("curves"))
            if (c.at("name") == "right_ear")
                for (const auto& p : c.at("points")) {
                    ear["boundary"].push_back(p);
                    ear["redrawn"].push_back({p[0].get<double>() + 3.0, p[1]});
                }
        CHECK(cli.Post(base + "/ear-edit", ear.dump(), "application/json")->status == 200);
        CHECK(cli.Post(base + "/ear-edit", "{", "application/json")->status == 400);
    }
    // a fresh server finds the session on disk
    REQUIRE(fs::exists(dir / id / "session.json"));
    {
        Running srv(options(dir));
        auto cli = srv.client();
        auto info = cli.Get("/sessions/" + id);
        REQUIRE(info->status == 200);
        const json j = json::parse(info->body);
        CHECK(j.at("version") == 1);
        CHECK(j.at("has_result") == true);
        CHECK(j.at("stage_runs").at("mouth_fill") == 1);
    }
    fs::remove_all(dir);
}

TEST_CASE("HTTP session from uploaded photo, mesh and camera")
{
    FaceShapeParams params;
    params.rows = 30;
    params.cols = 30;
    const FaceMesh mesh = make_face_mesh(params);
    const Camera cam = fit_frontal_camera(mesh, 256, 256);
    const Portrait portrait = make_portrait(mesh, cam, default_lighting(), 3);

    Running srv(options({}));
    auto cli = srv.client();
    httplib::MultipartFormDataItems items = {
        {"photo", encode_png(portrait.image), "photo.png", "image/png"},
        {"mesh", write_obj(mesh.vertices, mesh.triangles), "mesh.obj", "text/plain"},
        {"sidecar", sidecar_to_json(mesh).dump(), "mesh.json", "application/json"},
        {"camera", camera_to_json(cam).dump(), "camera.json", "application/json"},
    };
    auto res = cli.Post("/sessions", items);
    REQUIRE(res);
    CHECK(res->status == 201);
    const json j = json::parse(res->body);
    CHECK(j.at("width") == 256);

    // camera that does not match the photo
    Camera wrong = cam;
    wrong.width = 100;
    items[3].content = camera_to_json(wrong).dump();
    CHECK(cli.Post("/sessions", items)->status == 400);
    items.pop_back();
    CHECK(cli.Post("/sessions", items)->status == 400);
}

TEST_CASE("HTTP requests on distinct sessions run concurrently")
{
    Running srv(options({}));
    std::vector<std::string> ids;
    for (int k = 0; k < 2; ++k) {
        auto cli = srv.client();
        ids.push_back(json::parse(cli.Post("/sessions", kDemo.dump(), "application/json")->body).at("id"));
    }
    CHECK(ids[0] != ids[1]);
    std::vector<int> status(2, 0);
    std::vector<std::thread> threads;
    for (int k = 0; k < 2; ++k)
        threads.emplace_back([&, k] {
            auto cli = srv.client();
            status[static_cast<std::size_t>(k)] = cli.Post("/sessions/" + ids[static_cast<std::size_t>(k)] + "/synthesize", "", "application/json")->status;
        });
    for (auto& t : threads)
        t.join();
    CHECK(status[0] == 200);
    CHECK(status[1] == 200);
}
