// Acceptance run: one PASS/FAIL line per primary criterion.
#include "caric/composite.hpp"
#include "caric/dataset.hpp"
#include "caric/detail.hpp"
#include "caric/exaggeration.hpp"
#include "caric/image_ops.hpp"
#include "caric/lambda_field.hpp"
#include "caric/mesh_io.hpp"
#include "caric/param_domain.hpp"
#include "caric/pipeline.hpp"
#include "caric/relight.hpp"
#include "caric/sketch_match.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace caric;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

double seconds_since(clk::time_point t)
{
    return std::chrono::duration<double>(clk::now() - t).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& run)
{
    const auto t0 = clk::now();
    Outcome o;
    try {
        o = run();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
}

template <class... A>
std::string fmt(const char* f, A... a)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

FaceMesh face(int grid, std::uint64_t seed = 0)
{
    FaceShapeParams p = seed ? random_face_params(seed, grid, grid) : FaceShapeParams{};
    p.rows = grid;
    p.cols = grid;
    return make_face_mesh(p);
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("caric_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

// ---- solver exactness

Outcome solver_exactness()
{
    const auto t0 = clk::now();
    std::mt19937_64 rng(2101);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    double identity = 0.0, dense = 0.0;
    int meshes = 0;
    for (int k = 0; k < 20; ++k) {
        const FaceMesh mesh = k % 4 == 3 ? face(24, 50 + static_cast<std::uint64_t>(k)) : oracle::random_closed_mesh(rng, 500);
        const auto ctx = SolverContext::prefactor(mesh);
        const FaceMesh same = exaggerate(mesh, LambdaField::constant(mesh, 1.0), *ctx);
        identity = std::max(identity, oracle::max_abs(same.vertices - mesh.vertices) / bounding_box_diagonal(mesh.vertices));
        ++meshes;
        if (mesh.vertex_count() > 500)
            continue;
        for (int r = 0; r < 3; ++r) {
            LambdaField lambda = LambdaField::constant(mesh, 1.0);
            for (int v = 0; v < mesh.vertex_count(); ++v)
                lambda.values[v] = u(rng);
            const FaceMesh out = exaggerate(mesh, lambda, *ctx);
            const Eigen::MatrixXd ref = oracle::dense_exaggerate(mesh, lambda.values, 1.0);
            dense = std::max(dense, oracle::max_abs(out.vertices - ref) / oracle::max_abs(ref));
        }
    }
    const double t = seconds_since(t0);
    return {identity < 1e-6 && dense < 1e-6 && t < 60.0,
            fmt("%d meshes: identity rel Linf %.2e, sparse vs dense %.2e, %.1f s", meshes, identity, dense, t)};
}

// ---- self-consistency loop

double station_residual(const FaceMesh& mesh, const Camera& cam, const CurveParams& params, const SketchSet& target)
{
    double sum = 0.0;
    for (const auto& [name, pts] : project_stations(mesh, cam, params, 64)) {
        const auto want = resample(target.curve(name), 64);
        for (std::size_t k = 0; k < pts.size(); ++k)
            sum += (pts[k] - want[k]).squaredNorm();
    }
    return sum;
}

Outcome self_consistency()
{
    int reduced = 0, matched = 0;
    double worst_ratio = 0.0, worst_station = 0.0;
    const int triples = 50;
    for (int t = 0; t < triples; ++t) {
        const FaceMesh mesh = face(24, 300 + static_cast<std::uint64_t>(t / 5));
        const Camera cam = fit_frontal_camera(mesh, 1920, 1080);
        const auto ctx = SolverContext::prefactor(mesh);
        const LambdaBasis basis = LambdaBasis::build(mesh);
        SynthConfig cfg;
        cfg.kernels_per_face = 1 + t % 3;
        const SynthResult style = synth_exaggeration(mesh, 7000 + static_cast<std::uint64_t>(t), cfg);
        // Target geometry from the dense reference solve.
        const FaceMesh target = mesh.with_vertices(oracle::dense_exaggerate(mesh, style.lambda.values, 1.0));
        const SketchSet base = project_curves(mesh, cam);
        const CurveParams params = curve_params(base);
        SketchSet sketch = project_curves(target, cam);
        for (auto& [name, c] : sketch.curves)
            c.params = base.curve(name).params;

        const EstimateResult r = estimate_lambda(mesh, {observe(mesh, cam, sketch)}, *ctx, basis);
        const FaceMesh fitted = exaggerate(mesh, r.lambda, *ctx);
        const double before = station_residual(mesh, cam, params, sketch);
        const double after = station_residual(fitted, cam, params, sketch);
        const double ratio = before > 0.0 ? after / before : 0.0;
        worst_ratio = std::max(worst_ratio, ratio);
        reduced += ratio <= 0.2;

        const MatchResult m = match_sketch(fitted, cam, sketch, *ctx, &params);
        worst_station = std::max(worst_station, m.max_station_error_px);
        matched += m.max_station_error_px < 1.0;
    }
    return {reduced == triples && matched == triples,
            fmt("%d/%d residual cut >= 80%% (worst kept %.1f%%), %d/%d station error < 1 px (worst %.3f px)", reduced,
                triples, 100.0 * worst_ratio, matched, triples, worst_station)};
}

// ---- flatten round trip

Outcome flatten_round_trip()
{
    const FaceMesh m = face(48);
    LambdaField f = LambdaField::constant(m, 1.0);
    const Eigen::RowVector3d c1(0.0, 0.1, -1.1), c2(0.45, -0.5, -0.7);
    for (int v = 0; v < m.vertex_count(); ++v) {
        const Eigen::RowVector3d p = m.vertices.row(v);
        f.values[v] = 1.0 + 1.4 * std::exp(-(p - c1).squaredNorm() / 0.12) - 0.5 * std::exp(-(p - c2).squaredNorm() / 0.2);
    }
    const LambdaBounds bounds;
    const double range = bounds.max - bounds.min;
    std::string detail;
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity(), at256 = 0.0;
    for (int r : {64, 128, 256, 512}) {
        const ParamChart chart = ParamChart::build(m, r);
        const double err = (lambda_from_map(chart, lambda_to_map(chart, f)).values - f.values).cwiseAbs().maxCoeff();
        monotone = monotone && err < prev;
        prev = err;
        if (r == 256)
            at256 = err;
        detail += fmt("R=%d %.2e  ", r, err);
    }
    return {monotone && at256 < 2e-2 * range, detail + (monotone ? "(monotone)" : "(NOT monotone)")};
}

// ---- seam cut

Mask random_blob(std::mt19937_64& rng, int w, int h)
{
    Mask m(w, h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int discs = 1 + static_cast<int>(u(rng) * 3);
    for (int k = 0; k < discs; ++k) {
        const double cx = w * (0.3 + 0.4 * u(rng)), cy = h * (0.3 + 0.4 * u(rng));
        const double r = std::min(w, h) * (0.15 + 0.2 * u(rng));
        for (int y = 1; y + 1 < h; ++y)
            for (int x = 1; x + 1 < w; ++x)
                if ((x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r)
                    m.set(x, y, true);
    }
    return m;
}

Raster random_image(std::mt19937_64& rng, int w, int h, int ch = 3)
{
    Raster r(w, h, ch);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : r.data)
        v = u(rng);
    return r;
}

double brute_min_cut(const Mask& band, const Mask& inner, const Mask& outer, const Raster& diff)
{
    const int w = band.width, h = band.height;
    std::vector<int> id(static_cast<std::size_t>(w * h), -1);
    int n = 0;
    for (int i = 0; i < w * h; ++i)
        if (band.data[static_cast<std::size_t>(i)])
            id[static_cast<std::size_t>(i)] = n++;
    const int s = n, t = n + 1;
    std::vector<oracle::FlowEdge> edges;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int a = id[static_cast<std::size_t>(y * w + x)];
            if (a < 0)
                continue;
            if (inner(x, y))
                edges.push_back({s, a, 1e9});
            if (outer(x, y))
                edges.push_back({a, t, 1e9});
            const int nx[2] = {x + 1, x}, ny[2] = {y, y + 1};
            for (int k = 0; k < 2; ++k) {
                if (nx[k] >= w || ny[k] >= h)
                    continue;
                const int b = id[static_cast<std::size_t>(ny[k] * w + nx[k])];
                if (b < 0)
                    continue;
                const double c = static_cast<double>(diff.at(x, y)) + diff.at(nx[k], ny[k]);
                edges.push_back({a, b, c});
                edges.push_back({b, a, c});
            }
        }
    return oracle::edmonds_karp(n + 2, edges, s, t);
}

Outcome seam_optimality()
{
    std::mt19937_64 rng(4242);
    int agree = 0, total = 0;
    double worst = 0.0;
    while (total < 100) {
        const int w = 12 + static_cast<int>(rng() % 13), h = 12 + static_cast<int>(rng() % 13);
        const Mask mask = random_blob(rng, w, h);
        SeamOptions opts;
        opts.band = 2 + static_cast<int>(rng() % 3);
        Mask band, inner, outer;
        seam_band(mask, opts.band, band, inner, outer);
        if (!inner.any() || !outer.any())
            continue;
        const Raster fg = random_image(rng, w, h), bg = random_image(rng, w, h);
        const SeamResult seam = seam_cut(fg, mask, bg, opts);
        const Raster diff = color_difference(fg, bg);
        const double want = brute_min_cut(band, inner, outer, diff);
        // the returned labelling must realize the optimum it reports
        const double realized = seam_cost(seam.labels, band, diff);
        const double err = std::max(std::abs(seam.cost - want), std::abs(realized - want)) / std::max(1.0, want);
        worst = std::max(worst, err);
        agree += err < 1e-9;
        ++total;
    }
    return {agree == total, fmt("%d/%d bands equal the Edmonds-Karp min cut (worst rel %.1e)", agree, total, worst)};
}

// ---- Poisson, alpha and identity run

std::vector<std::vector<double>> grid_of(const Raster& r, int c)
{
    std::vector<std::vector<double>> g(static_cast<std::size_t>(r.height), std::vector<double>(static_cast<std::size_t>(r.width)));
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            g[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = r.at(x, y, c);
    return g;
}

Outcome poisson_alpha_identity()
{
    std::mt19937_64 rng(77);
    double poisson = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
        const Raster g = random_image(rng, 32, 32, 2), b = random_image(rng, 32, 32, 2);
        const Mask region = random_blob(rng, 32, 32);
        PoissonOptions opts;
        opts.direct = trial % 2 == 0;
        opts.tolerance = 1e-10;
        const Raster out = poisson_solve(g, b, region, opts);
        std::vector<std::vector<char>> rg(32, std::vector<char>(32));
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                rg[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = region(x, y);
        for (int c = 0; c < 2; ++c) {
            std::vector<std::pair<int, int>> px;
            const Eigen::VectorXd ref = oracle::dense_poisson(grid_of(g, c), grid_of(b, c), rg, px);
            for (std::size_t i = 0; i < px.size(); ++i)
                poisson = std::max(poisson, std::abs(out.at(px[i].first, px[i].second, c) - ref(static_cast<Eigen::Index>(i))));
        }
    }

    // alpha: synthetic flat render with perturbed normals after
    const SHLighting light = default_lighting();
    RenderOutput r;
    r.color = Raster(32, 32, 3, 0.5f);
    r.mask = Mask(32, 32, true);
    r.excluded = Mask(32, 32);
    r.normals_before = Raster(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            r.normals_before.at(x, y, 2) = -1.0f;
    r.normals_after = r.normals_before;
    std::normal_distribution<double> gn(0.0, 0.3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const Eigen::Vector3d n = Eigen::Vector3d(gn(rng), gn(rng), -1.0).normalized();
            for (int c = 0; c < 3; ++c)
                r.normals_after.at(x, y, c) = static_cast<float>(n(c));
        }
    const Mask full(32, 32, true);
    AlphaOptions one;
    one.downsample = 1;
    const Raster alpha = build_alpha(light, r, full, one);
    const Raster raw = raw_alpha(light, r, full);
    std::vector<std::vector<double>> d(32, std::vector<double>(32)), zero(32, std::vector<double>(32, 0.0));
    std::vector<std::vector<char>> interior(32, std::vector<char>(32, 0));
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            d[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = raw.at(x, y) - 1.0;
            interior[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = x > 0 && y > 0 && x < 31 && y < 31;
        }
    std::vector<std::pair<int, int>> px;
    const Eigen::VectorXd ref = oracle::dense_poisson(d, zero, interior, px);
    double alpha_err = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i)
        alpha_err = std::max(alpha_err, std::abs(alpha.at(px[i].first, px[i].second) -
                                                 std::clamp(1.0 + ref(static_cast<Eigen::Index>(i)), 0.3, 3.0)));
    bool edge_one = true;
    for (int k = 0; k < 32; ++k)
        edge_one = edge_one && alpha.at(k, 0) == 1.0f && alpha.at(0, k) == 1.0f && alpha.at(k, 31) == 1.0f &&
                   alpha.at(31, k) == 1.0f;
    // downsampled alpha on a disc: exactly one on and outside the face edge
    Mask round(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            round.set(x, y, (x + 0.5 - 16) * (x + 0.5 - 16) + (y + 0.5 - 16) * (y + 0.5 - 16) <= 13 * 13);
    const Raster a4 = build_alpha(light, r, round);
    const Mask edge = mask_boundary(round);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (!round(x, y) || edge(x, y))
                edge_one = edge_one && a4.at(x, y) == 1.0f;

    // end-to-end identity run
    DemoConfig demo;
    demo.width = demo.height = 512;
    auto s = make_demo_session("identity", demo);
    const Raster out = s->synthesize();
    const Raster photo = s->photo();
    const RenderOutput base = render_textured(s->input_mesh(), s->input_mesh(), s->view_camera(View::Frontal), photo);
    const Mask region = mask_or(base.mask, base.excluded);
    const double db = psnr(out, photo, &region);

    return {poisson < 1e-4 && alpha_err < 1e-4 && edge_one && db > 30.0,
            fmt("Poisson vs dense %.1e, alpha vs dense %.1e, boundary alpha == 1: %s, identity PSNR %.1f dB", poisson,
                alpha_err, edge_one ? "yes" : "no", db)};
}

// ---- lighting

Outcome lighting_recovery()
{
    const int size = 64;
    Mask region(size, size);
    Raster normals(size, size, 3);
    const double c = size / 2.0, rad = size / 2.0 - 1.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5 - c) / rad, v = (y + 0.5 - c) / rad;
            if (u * u + v * v >= 0.95)
                continue;
            region.set(x, y, true);
            normals.at(x, y, 0) = static_cast<float>(u);
            normals.at(x, y, 1) = static_cast<float>(v);
            normals.at(x, y, 2) = static_cast<float>(-std::sqrt(1.0 - u * u - v * v));
        }
    std::mt19937_64 rng(9001);
    std::normal_distribution<double> g(0.0, 0.3);
    int ok = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        SHLighting truth;
        truth.coeffs(0) = 1.0;
        for (int k = 1; k < 9; ++k)
            truth.coeffs(k) = g(rng);
        Raster img(size, size, 1);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (region(x, y))
                    img.at(x, y) = static_cast<float>(
                        0.5 * truth.eval(Eigen::Vector3d(normals.at(x, y, 0), normals.at(x, y, 1), normals.at(x, y, 2))));
        LightingOptions opts;
        opts.albedo_mean = 0.5; // the gauge
        const LightingResult r = estimate_lighting(img, normals, region, opts);
        const double rel = (r.light.coeffs - truth.coeffs).norm() / truth.coeffs.norm();
        worst = std::max(worst, rel);
        ok += rel < 0.05;
    }
    return {ok == 20, fmt("%d/20 lights within 5%% (worst %.2f%%)", ok, 100.0 * worst)};
}

// ---- residual seam property over dataset samples

Outcome residual_seams(const fs::path& dataset)
{
    const DatasetManifest manifest = read_manifest(dataset);
    int pass = 0, direct_fail = 0, total = 0;
    double worst = 0.0;
    const ResidualEnhancer base = [](const Raster& p, const Raster& st) { return baseline_enhancer(p, st); };
    for (const auto& sample : manifest.samples) {
        const LoadedSample ls = load_sample(dataset, sample);
        const Portrait portrait = make_portrait(ls.input, ls.camera, default_lighting(), sample.seed);
        RenderOptions ro;
        ro.exclude_eyes_mouth = false;
        const RenderOutput r = render_textured(ls.input, ls.exaggerated, ls.camera, portrait.image, ro);
        Raster image = r.color;
        image.mask.clear();
        Raster stretch = r.stretch;
        for (std::size_t p = 0; p < stretch.pixel_count(); ++p)
            if (stretch.has_mask() && !stretch.mask[p])
                stretch.data[p] = 0.0f;
        stretch.mask.clear();
        const PatchPlan plan = plan_patches(r.mask);
        if (plan.origins.size() < 2)
            continue;
        ++total;
        const SeamMetric residual = seam_metric(enhance(image, r.stretch, plan, base),
                                                enhance_whole(image, r.stretch, base), plan, r.mask);
        worst = std::max(worst, residual.ratio());
        pass += residual.passes();
        const SeamMetric direct = seam_metric(enhance_direct(image, r.stretch, plan, direct_color_enhancer),
                                              direct_color_enhancer(image, stretch), plan, r.mask);
        direct_fail += !direct.passes();
    }
    return {total > 0 && pass == total && 2 * direct_fail >= total,
            fmt("residual merge passes %d/%d samples (worst ratio %.3f); direct colour fails %d/%d", pass, total, worst,
                direct_fail, total)};
}

// ---- dataset generators

std::vector<ExpressionPair> expressions(int grid)
{
    FaceShapeParams base;
    base.rows = base.cols = grid;
    return {{make_face_mesh(base), make_face_mesh(base, FaceExpression{0.8, 0.0, 0.0})},
            {make_face_mesh(base), make_face_mesh(base, FaceExpression{0.0, 0.6, 0.5})}};
}

Outcome dataset_generators(const fs::path& a, const fs::path& b)
{
    std::vector<FaceMesh> meshes;
    for (std::uint64_t s = 1; s <= 3; ++s)
        meshes.push_back(face(24, 900 + s));
    DatasetConfig cfg;
    cfg.seed = 31;
    cfg.n_styles = 4;
    cfg.map_resolution = 64;
    cfg.image_width = cfg.image_height = 512;
    cfg.synth.scale_min = 1.2;
    cfg.synth.scale_max = 3.0;
    cfg.workers = 2;
    const DatasetManifest ma = generate_dataset(meshes, expressions(24), a, cfg);
    cfg.workers = 1;
    const DatasetManifest mb = generate_dataset(meshes, expressions(24), b, cfg);
    const bool same_manifest = read_text_file(a / "manifest.jsonl") == read_text_file(b / "manifest.jsonl");
    bool same_files = true;
    for (const auto& s : ma.samples)
        for (const auto& [role, path] : s.files)
            same_files = same_files && read_text_file(a / path) == read_text_file(b / path);
    const std::size_t loaded = load_check(a);

    // detail pairs at desk scale: 2 photos x 3 levels
    const fs::path pairs = scratch("pairs");
    std::size_t written = 0;
    PairConfig pc;
    pc.levels = 3;
    pc.crops = 2;
    pc.crop = 128;
    for (int k = 0; k < 2; ++k) {
        const FaceMesh mesh = face(32, 40 + static_cast<std::uint64_t>(k));
        const Camera cam = fit_frontal_camera(mesh, 320, 320);
        const Portrait portrait = make_portrait(mesh, cam, default_lighting(), 60 + static_cast<std::uint64_t>(k));
        written += write_training_pairs(pairs, k, make_training_pairs(portrait.image, mesh, cam, pc), pc.crop);
    }
    fs::remove_all(pairs);

    const bool counts = dataset_sample_count(150, 10, 25) == 37500 && training_pair_count(899, 10) == 8990 &&
                        ma.samples.size() == dataset_sample_count(3, 4, 2) && written == training_pair_count(2, 3);
    return {counts && same_manifest && same_files && loaded == ma.samples.size() && !ma.partial && !mb.partial,
            fmt("150x10x25 = %zu, 899x10 = %zu; desk scale 3x4x2 = %zu samples (bit-exact across worker counts: %s), "
                "2x3 = %zu pairs",
                dataset_sample_count(150, 10, 25), training_pair_count(899, 10), ma.samples.size(),
                same_manifest && same_files ? "yes" : "no", written)};
}

// ---- interactive budget

Polyline bumped(const SketchCurve& c, double s0, double s1, double bump)
{
    Polyline out;
    for (int k = 0; k <= 24; ++k) {
        const double t = s0 + (s1 - s0) * k / 24.0;
        out.push_back(c.at(t) + Eigen::Vector2d(0.0, bump * std::sin(std::numbers::pi * k / 24.0)));
    }
    return out;
}

Outcome interactive_budget()
{
    DemoConfig demo;
    demo.rows = demo.cols = 100; // 10,000 vertices
    demo.width = demo.height = 1080;
    auto s = make_demo_session("budget", demo);
    const SketchCurve mouth = s->sketch(View::Frontal).curve("mouth");
    const SketchCurve nose = s->sketch(View::Frontal).curve("nose");
    double edit_ms = 0.0, err = 0.0;
    const std::vector<SketchEdit> edits = {
        {"mouth", 0.2, 0.8, bumped(mouth, 0.2, 0.8, 15.0)},
        {"nose", 0.4, 1.0, bumped(nose, 0.4, 1.0, 10.0)},
        {"mouth", 0.1, 0.9, bumped(mouth, 0.1, 0.9, -10.0)},
    };
    for (const auto& e : edits) {
        const auto t0 = clk::now();
        const EditPreview p = s->edit(e, View::Frontal);
        edit_ms = std::max(edit_ms, 1000.0 * seconds_since(t0));
        err = std::max(err, p.max_station_error_px);
    }
    const auto t0 = clk::now();
    s->synthesize();
    const double synth_s = seconds_since(t0);
    return {edit_ms < 500.0 && synth_s < 15.0,
            fmt("%d vertices at 1080p: edit_cycle max %.0f ms (station error %.2f px), synthesize %.2f s; "
                "%u hardware thread(s)",
                s->current_mesh().vertex_count(), edit_ms, err, synth_s, std::thread::hardware_concurrency())};
}

} // namespace

int main()
{
    const fs::path a = scratch("dataset_a"), b = scratch("dataset_b");
    report("solver exactness", solver_exactness);
    report("self-consistency loop", self_consistency);
    report("flatten round trip", flatten_round_trip);
    report("seam-cut optimality", seam_optimality);
    report("poisson/alpha/identity", poisson_alpha_identity);
    report("SH lighting recovery", lighting_recovery);
    report("dataset generators", [&] { return dataset_generators(a, b); });
    report("residual seam property", [&] { return residual_seams(a); });
    report("interactive budget", interactive_budget);
    fs::remove_all(a);
    fs::remove_all(b);
    std::printf("%s\n", failures == 0 ? "ALL PRIMARY CRITERIA PASS" : fmt("%d criteria FAILED", failures).c_str());
    return failures == 0 ? 0 : 1;
}
