// forge: command line front end for the caricature engine.
#include "caric/dataset.hpp"
#include "caric/detail.hpp"
#include "caric/error.hpp"
#include "caric/image_io.hpp"
#include "caric/mesh_io.hpp"
#include "caric/pipeline.hpp"
#include "caric/predictor.hpp"
#include "caric/server.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <random>

using namespace caric;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p)
{
    try {
        return json::parse(read_text_file(p));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, p.string() + ": " + e.what());
    }
}

fs::path sidecar_for(const fs::path& obj, const std::string& given)
{
    if (!given.empty())
        return given;
    fs::path p = obj;
    return p.replace_extension(".json");
}

std::unique_ptr<LambdaPredictor> make_predictor(const std::string& url, const std::string& cmd, const fs::path& work)
{
    if (!url.empty()) {
        const auto colon = url.rfind(':');
        if (colon == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "--predictor-url expects host:port");
        return std::make_unique<HttpPredictor>(url.substr(0, colon), std::stoi(url.substr(colon + 1)));
    }
    if (!cmd.empty())
        return std::make_unique<FileExchangePredictor>(work, cmd);
    return nullptr;
}

ApiServer* g_server = nullptr;

void on_signal(int)
{
    if (g_server)
        g_server->stop();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"forge: sketch-driven face exaggeration and photo synthesis"};
    app.require_subcommand(1);

    // demo
    auto* demo = app.add_subcommand("demo", "create a synthetic session (portrait, mesh, camera)");
    DemoConfig dcfg;
    fs::path demo_out;
    demo->add_option("--out", demo_out, "session directory")->required();
    demo->add_option("--rows", dcfg.rows);
    demo->add_option("--cols", dcfg.cols);
    demo->add_option("--width", dcfg.width);
    demo->add_option("--height", dcfg.height);
    demo->add_option("--seed", dcfg.seed);
    demo->add_option("--smile", dcfg.expression.smile);
    demo->add_option("--jaw-open", dcfg.expression.jaw_open);
    demo->add_option("--brow-raise", dcfg.expression.brow_raise);

    // session create
    auto* session = app.add_subcommand("session", "create a session directory from a photo, mesh and camera");
    fs::path s_photo, s_mesh, s_neutral, s_camera, s_out;
    std::string s_sidecar;
    session->add_option("--photo", s_photo)->required()->check(CLI::ExistingFile);
    session->add_option("--mesh", s_mesh)->required()->check(CLI::ExistingFile);
    session->add_option("--sidecar", s_sidecar, "defaults to the mesh path with .json");
    session->add_option("--neutral", s_neutral, "neutral-expression mesh (same topology)");
    session->add_option("--camera", s_camera)->required()->check(CLI::ExistingFile);
    session->add_option("--out", s_out)->required();

    // sketch
    auto* sketch = app.add_subcommand("sketch", "print the current sketch of a session view");
    fs::path k_session, k_out;
    std::string k_view = "frontal";
    sketch->add_option("--session", k_session)->required();
    sketch->add_option("--view", k_view);
    sketch->add_option("--out", k_out);

    // edit
    auto* edit = app.add_subcommand("edit", "apply one erase-and-redraw edit to a session");
    fs::path e_session, e_edit, e_preview;
    std::string e_view = "frontal";
    edit->add_option("--session", e_session)->required();
    edit->add_option("--edit", e_edit, "JSON: curve, s0, s1, replacement")->required()->check(CLI::ExistingFile);
    edit->add_option("--view", e_view);
    edit->add_option("--preview", e_preview, "write the preview JSON here");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "render the caricature photo of a session");
    fs::path y_session, y_dump, y_out;
    synth->add_option("--session", y_session)->required();
    synth->add_option("--dump-stages", y_dump, "write the six intermediates here");
    synth->add_option("--out", y_out, "PNG of the result");

    // exaggerate
    auto* exag = app.add_subcommand("exaggerate", "exaggerate a mesh to match an edited sketch");
    fs::path x_mesh, x_sketch, x_out, x_camera, x_lambda, x_work = "predictor_exchange";
    std::string x_sidecar, x_url, x_cmd;
    exag->add_option("--mesh", x_mesh)->required()->check(CLI::ExistingFile);
    exag->add_option("--sidecar", x_sidecar);
    exag->add_option("--sketch", x_sketch, "edited sketch JSON (frontal or side)")->required()->check(CLI::ExistingFile);
    exag->add_option("--camera", x_camera, "camera JSON; default frames the mesh at 1080 x 1080");
    exag->add_option("--out", x_out, "exaggerated OBJ")->required();
    exag->add_option("--lambda-out", x_lambda, "per-vertex lambda as JSON");
    exag->add_option("--predictor-url", x_url, "host:port of an external lambda predictor");
    exag->add_option("--predictor-cmd", x_cmd, "command run on a file exchange directory");
    exag->add_option("--predictor-dir", x_work);

    // dataset
    auto* dataset = app.add_subcommand("dataset", "training data generators");
    dataset->require_subcommand(1);
    auto* gen = dataset->add_subcommand("gen", "exaggeration samples: meshes x styles x expressions");
    int g_meshes = 3, g_expr = 2, g_rows = 32, g_cols = 32;
    DatasetConfig g_cfg;
    fs::path g_out;
    gen->add_option("--meshes", g_meshes);
    gen->add_option("--styles", g_cfg.n_styles);
    gen->add_option("--expressions", g_expr);
    gen->add_option("--rows", g_rows);
    gen->add_option("--cols", g_cols);
    gen->add_option("--seed", g_cfg.seed);
    gen->add_option("--map-resolution", g_cfg.map_resolution);
    gen->add_option("--image-size", g_cfg.image_width);
    gen->add_option("--workers", g_cfg.workers);
    gen->add_option("--out", g_out)->required();
    auto* pairs = dataset->add_subcommand("pairs", "detail-enhancement pairs: photos x levels");
    int p_photos = 2, p_size = 512, p_rows = 48;
    PairConfig p_cfg;
    fs::path p_out;
    pairs->add_option("--photos", p_photos);
    pairs->add_option("--levels", p_cfg.levels);
    pairs->add_option("--crops", p_cfg.crops);
    pairs->add_option("--crop", p_cfg.crop);
    pairs->add_option("--size", p_size, "portrait width and height");
    pairs->add_option("--rows", p_rows, "face grid rows and columns");
    pairs->add_option("--seed", p_cfg.seed);
    pairs->add_option("--out", p_out)->required();
    auto* check = dataset->add_subcommand("check", "reload every sample of a generated dataset");
    fs::path c_out;
    check->add_option("--out", c_out)->required();

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    ServerOptions srv;
    serve->add_option("--port", srv.port);
    serve->add_option("--host", srv.host);
    serve->add_option("--data", srv.data_dir, "session directory root");
    serve->add_option("--threads", srv.threads);

    // raster
    auto* raster = app.add_subcommand("raster", "raster container utilities");
    raster->require_subcommand(1);
    auto* topng = raster->add_subcommand("png", "convert a raster container to PNG");
    fs::path r_in, r_out;
    bool r_linear = false;
    topng->add_option("--in", r_in)->required()->check(CLI::ExistingFile);
    topng->add_option("--out", r_out)->required();
    topng->add_flag("--linear", r_linear, "write values without the sRGB transfer");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*demo) {
            auto s = make_demo_session(demo_out.filename().string(), dcfg);
            s->save(demo_out);
            save_png(demo_out / "photo.png", s->photo());
            save_face_mesh(s->input_mesh(), demo_out / "input.obj", demo_out / "input.json");
            write_text_file(demo_out / "camera.json", camera_to_json(s->view_camera(View::Frontal)).dump(1) + "\n");
            write_text_file(demo_out / "sketch_frontal.json", sketch_to_json(s->sketch(View::Frontal)).dump(1) + "\n");
            std::cout << "session " << s->id() << " written to " << demo_out << "\n";
        } else if (*session) {
            FaceMesh mesh = load_face_mesh(s_mesh, sidecar_for(s_mesh, s_sidecar));
            FaceMesh neutral = mesh;
            if (!s_neutral.empty())
                neutral = load_face_mesh(s_neutral, sidecar_for(s_mesh, s_sidecar));
            Raster photo = load_image(s_photo);
            const Camera cam = camera_from_json(read_json(s_camera));
            Session s(s_out.filename().string(), std::move(photo), std::move(mesh), std::move(neutral), cam);
            s.save(s_out);
            std::cout << "session " << s.id() << " written to " << s_out << "\n";
        } else if (*sketch) {
            auto s = Session::load(k_session);
            const std::string text = sketch_to_json(s->sketch(view_from_name(k_view))).dump(1) + "\n";
            if (k_out.empty())
                std::cout << text;
            else
                write_text_file(k_out, text);
        } else if (*edit) {
            auto s = Session::load(e_session);
            const EditPreview p = s->edit(edit_from_json(read_json(e_edit)), view_from_name(e_view));
            s->save(e_session);
            if (!e_preview.empty())
                write_text_file(e_preview, preview_to_json(p).dump() + "\n");
            std::printf("version %d  changed %s  station error %.3f px  lambda [%.3f, %.3f]\n", s->version(),
                        p.changed ? "yes" : "no", p.max_station_error_px, p.lambda_min, p.lambda_max);
        } else if (*synth) {
            auto s = Session::load(y_session);
            const Raster out = s->synthesize();
            s->save(y_session);
            if (!y_dump.empty())
                s->dump_stages(y_dump);
            save_png(y_out.empty() ? y_session / "result.png" : y_out, out);
            for (const auto& [k, ms] : s->stage_timings())
                std::printf("%-18s %8.1f ms\n", k.c_str(), ms);
        } else if (*exag) {
            FaceMesh mesh = load_face_mesh(x_mesh, sidecar_for(x_mesh, x_sidecar));
            const SketchSet edited = sketch_from_json(read_json(x_sketch));
            Camera cam = x_camera.empty() ? fit_frontal_camera(mesh, 1080, 1080) : camera_from_json(read_json(x_camera));
            if (edited.view == View::Side)
                cam = cam.side_view(mesh);
            auto ctx = SolverContext::prefactor(mesh);
            const SketchSet base = project_curves(mesh, cam);
            const CurveParams params = curve_params(base);
            LambdaField lambda;
            if (auto predictor = make_predictor(x_url, x_cmd, x_work)) {
                const ParamChart chart = ParamChart::build(mesh);
                FlattenedMaps maps;
                flatten_laplacians(chart, compute_laplacians(mesh), maps.laplacian_direction, maps.laplacian_magnitude);
                flatten_sketch(chart, mesh, correspondence_displacements(base, edited), params, cam,
                               maps.sketch_direction, maps.sketch_magnitude);
                lambda = run_external_predictor(maps, *predictor, chart);
            } else {
                const LambdaBasis basis = LambdaBasis::build(mesh);
                ViewObservation obs{cam, params, correspondence_displacements(base, edited)};
                lambda = estimate_lambda(mesh, {obs}, *ctx, basis).lambda;
            }
            const FaceMesh ex = exaggerate(mesh, lambda, *ctx);
            const MatchResult m = match_sketch(ex, cam, edited, *ctx, &params);
            write_text_file(x_out, write_obj(m.mesh.vertices, m.mesh.triangles));
            if (!x_lambda.empty()) {
                std::vector<double> v(lambda.values.data(), lambda.values.data() + lambda.values.size());
                write_text_file(x_lambda, json(v).dump() + "\n");
            }
            std::printf("lambda [%.3f, %.3f]  station error %.3f px\n", lambda.values.minCoeff(),
                        lambda.values.maxCoeff(), m.max_station_error_px);
        } else if (*gen) {
            std::vector<FaceMesh> meshes;
            for (int m = 0; m < g_meshes; ++m)
                meshes.push_back(make_face_mesh(random_face_params(g_cfg.seed * 1000 + static_cast<std::uint64_t>(m), g_rows, g_cols)));
            std::vector<ExpressionPair> expressions;
            FaceShapeParams base;
            base.rows = g_rows;
            base.cols = g_cols;
            std::mt19937_64 rng(g_cfg.seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (int e = 0; e < g_expr; ++e) {
                const FaceExpression ex{u(rng), 0.6 * u(rng), 0.5 * u(rng)};
                expressions.emplace_back(make_face_mesh(base), make_face_mesh(base, ex));
            }
            g_cfg.image_height = g_cfg.image_width;
            const DatasetManifest m = generate_dataset(meshes, expressions, g_out, g_cfg);
            std::printf("%zu samples (%s)\n", m.samples.size(), m.partial ? "partial" : "complete");
            if (m.partial)
                throw Error(ErrorCode::Io, m.error);
        } else if (*pairs) {
            std::size_t written = 0;
            for (int k = 0; k < p_photos; ++k) {
                FaceShapeParams fp = random_face_params(p_cfg.seed * 1000 + static_cast<std::uint64_t>(k), p_rows, p_rows);
                const FaceMesh mesh = make_face_mesh(fp);
                const Camera cam = fit_frontal_camera(mesh, p_size, p_size);
                const Portrait portrait = make_portrait(mesh, cam, default_lighting(), p_cfg.seed + static_cast<std::uint64_t>(k));
                PairConfig cfg = p_cfg;
                cfg.seed = p_cfg.seed * 7919 + static_cast<std::uint64_t>(k);
                written += write_training_pairs(p_out, k, make_training_pairs(portrait.image, mesh, cam, cfg), cfg.crop);
            }
            std::printf("%zu pairs (expected %zu)\n", written,
                        training_pair_count(static_cast<std::size_t>(p_photos), p_cfg.levels));
        } else if (*check) {
            std::printf("%zu samples load\n", load_check(c_out));
        } else if (*serve) {
            ApiServer server(srv);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = server.bind();
            std::printf("listening on %s:%d\n", srv.host.c_str(), port);
            std::fflush(stdout);
            server.run();
            g_server = nullptr;
        } else if (*topng) {
            save_png(r_out, read_raster(r_in), r_linear ? Transfer::Linear : Transfer::Srgb);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "forge: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "forge: %s\n", e.what());
        return 1;
    }
    return 0;
}
