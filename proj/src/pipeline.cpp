#include "caric/pipeline.hpp"

#include "caric/deformation_transfer.hpp"
#include "caric/error.hpp"
#include "caric/image_io.hpp"
#include "caric/image_ops.hpp"
#include "caric/mesh_io.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace caric {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Re-throws engine errors with the failing stage prefixed.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.message());
    }
}

void check_cancel(const std::atomic<bool>* a, const std::atomic<bool>& b, const char* next)
{
    if ((a && a->load()) || b.load())
        throw Error(ErrorCode::Cancelled, std::string("synthesis cancelled before ") + next);
}

json points_to_json(const std::vector<Eigen::Vector2d>& pts)
{
    json out = json::array();
    for (const auto& p : pts)
        out.push_back({p.x(), p.y()});
    return out;
}

void write_bytes(const fs::path& path, const std::string& bytes)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

Raster mask_raster(const Mask& m)
{
    Raster r(m.width, m.height, 1);
    for (std::size_t p = 0; p < m.data.size(); ++p)
        r.data[p] = m.data[p] ? 1.0f : 0.0f;
    return r;
}

Mask raster_mask(const Raster& r)
{
    Mask m(r.width, r.height);
    for (std::size_t p = 0; p < m.data.size(); ++p)
        m.data[p] = r.data[p] != 0.0f ? 1 : 0;
    return m;
}

Raster bytes_raster(const std::vector<std::uint8_t>& v, int w, int h)
{
    Raster r(w, h, 1);
    for (std::size_t p = 0; p < v.size(); ++p)
        r.data[p] = static_cast<float>(v[p]);
    return r;
}

std::vector<std::uint8_t> raster_bytes(const Raster& r)
{
    std::vector<std::uint8_t> v(r.data.size());
    for (std::size_t p = 0; p < v.size(); ++p)
        v[p] = static_cast<std::uint8_t>(r.data[p]);
    return v;
}

void save_vertices(const fs::path& path, const FaceMesh& mesh)
{
    write_bytes(path, write_obj(mesh.vertices, mesh.triangles));
}

FaceMesh load_vertices(const fs::path& path, const FaceMesh& like)
{
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i t;
    read_obj(read_text_file(path), v, t);
    if (v.rows() != like.vertices.rows() || t != like.triangles)
        throw Error(ErrorCode::TopologyMismatch, path.string() + " does not match the session mesh");
    return like.with_vertices(std::move(v));
}

// Block average of the grey image, centre normal, block fully inside the region.
void subsample_lighting(const Raster& gray, const Raster& normals, const Mask& region, int f, Raster& g_out,
                        Raster& n_out, Mask& r_out)
{
    const int w = gray.width / f, h = gray.height / f;
    g_out = Raster(w, h, 1);
    n_out = Raster(w, h, 3);
    r_out = Mask(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool inside = true;
            double sum = 0.0;
            for (int j = 0; j < f && inside; ++j)
                for (int i = 0; i < f; ++i) {
                    const int px = x * f + i, py = y * f + j;
                    if (!region(px, py) || !normals.valid(px, py)) {
                        inside = false;
                        break;
                    }
                    sum += gray.at(px, py);
                }
            if (!inside)
                continue;
            const int cx = x * f + f / 2, cy = y * f + f / 2;
            g_out.at(x, y) = static_cast<float>(sum / (f * f));
            for (int c = 0; c < 3; ++c)
                n_out.at(x, y, c) = normals.at(cx, cy, c);
            r_out.set(x, y, true);
        }
}

void save_render(const fs::path& dir, const RenderOutput& r)
{
    write_bytes(dir / "render_color.crst", encode_raster(r.color));
    write_bytes(dir / "render_mask.crst", encode_raster(mask_raster(r.mask)));
    write_bytes(dir / "render_normals_before.crst", encode_raster(r.normals_before));
    write_bytes(dir / "render_normals_after.crst", encode_raster(r.normals_after));
    write_bytes(dir / "render_stretch.crst", encode_raster(r.stretch));
    write_bytes(dir / "render_depth.crst", encode_raster(r.depth));
    write_bytes(dir / "render_region.crst", encode_raster(bytes_raster(r.region, r.mask.width, r.mask.height)));
    write_bytes(dir / "render_excluded.crst", encode_raster(mask_raster(r.excluded)));
}

RenderOutput load_render(const fs::path& dir)
{
    RenderOutput r;
    r.color = read_raster(dir / "render_color.crst");
    r.mask = raster_mask(read_raster(dir / "render_mask.crst"));
    r.normals_before = read_raster(dir / "render_normals_before.crst");
    r.normals_after = read_raster(dir / "render_normals_after.crst");
    r.stretch = read_raster(dir / "render_stretch.crst");
    r.depth = read_raster(dir / "render_depth.crst");
    r.region = raster_bytes(read_raster(dir / "render_region.crst"));
    r.excluded = raster_mask(read_raster(dir / "render_excluded.crst"));
    return r;
}

Camera frontalize(const Camera& camera, const FaceMesh& mesh)
{
    if ((camera.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12) {
        Camera c = camera;
        c.view = View::Frontal;
        return c;
    }
    // Keep scale and the projected centroid; drop the head rotation.
    const Eigen::Vector3d centroid = mesh.vertices.colwise().mean().transpose();
    Camera c = camera;
    c.view = View::Frontal;
    c.rotation = Eigen::Matrix3d::Identity();
    c.translation = camera.project(centroid) - c.scale * centroid.head<2>();
    return c;
}

} // namespace

json config_to_json(const SessionConfig& c)
{
    return {
        {"stations", c.stations},
        {"snap_radius_px", c.sketch.snap_radius_px},
        {"estimator_mu", c.estimator.mu},
        {"estimator_iterations", c.estimator.max_iterations},
        {"lambda_min", c.bounds.min},
        {"lambda_max", c.bounds.max},
        {"basis_smoothing", c.basis_smoothing},
        {"chart_resolution", c.chart_resolution},
        {"enhance_detail", c.enhance_detail},
        {"patch", c.patch},
        {"patch_stride", c.patch_stride},
        {"seam_band", c.seam.band},
        {"poisson_tolerance", c.poisson.tolerance},
        {"warp_cell", c.warp.cell},
        {"lighting_max_pixels", c.lighting_max_pixels},
        {"alpha_downsample", c.alpha.downsample},
    };
}

SessionConfig config_from_json(const json& j)
{
    SessionConfig c;
    c.stations = j.value("stations", c.stations);
    c.match.stations = c.stations;
    c.sketch.stations = c.stations;
    c.sketch.snap_radius_px = j.value("snap_radius_px", c.sketch.snap_radius_px);
    c.estimator.mu = j.value("estimator_mu", c.estimator.mu);
    c.estimator.max_iterations = j.value("estimator_iterations", c.estimator.max_iterations);
    c.bounds.min = j.value("lambda_min", c.bounds.min);
    c.bounds.max = j.value("lambda_max", c.bounds.max);
    c.basis_smoothing = j.value("basis_smoothing", c.basis_smoothing);
    c.chart_resolution = j.value("chart_resolution", c.chart_resolution);
    c.enhance_detail = j.value("enhance_detail", c.enhance_detail);
    c.patch = j.value("patch", c.patch);
    c.patch_stride = j.value("patch_stride", c.patch_stride);
    c.seam.band = j.value("seam_band", c.seam.band);
    c.poisson.tolerance = j.value("poisson_tolerance", c.poisson.tolerance);
    c.warp.cell = j.value("warp_cell", c.warp.cell);
    c.lighting_max_pixels = j.value("lighting_max_pixels", c.lighting_max_pixels);
    c.alpha.downsample = j.value("alpha_downsample", c.alpha.downsample);
    return c;
}

json preview_to_json(const EditPreview& p)
{
    json proj = json::array();
    for (const auto& q : p.projection)
        proj.push_back({q.x(), q.y()});
    return {
        {"view", std::string(view_name(p.view))},
        {"sketch", sketch_to_json(p.sketch)},
        {"projection", std::move(proj)},
        {"max_station_error_px", p.max_station_error_px},
        {"lambda_min", p.lambda_min},
        {"lambda_max", p.lambda_max},
        {"changed", p.changed},
    };
}

const std::vector<std::string>& dumped_stage_names()
{
    static const std::vector<std::string> names{"render", "enhanced", "background", "composite", "alpha", "result"};
    return names;
}

Session::Session(std::string id, Raster photo, FaceMesh mesh, FaceMesh neutral, Camera camera, SessionConfig config)
    : id_(std::move(id))
    , config_(std::move(config))
    , photo_(std::move(photo))
    , mesh_(std::move(mesh))
    , neutral_(std::move(neutral))
    , camera_(std::move(camera))
{
    prepare();
    geometry_.lambda = LambdaField::constant(neutral_, 1.0);
    geometry_.neutral_exaggerated = neutral_;
    geometry_.expression_exaggerated = mesh_;
    geometry_.current = mesh_;
}

void Session::prepare()
{
    if (id_.empty())
        throw Error(ErrorCode::InvalidArgument, "session id is empty");
    if (photo_.empty() || photo_.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "session photo must be a non-empty RGB image");
    mesh_.validate();
    neutral_.validate();
    if (mesh_.topology_id() != neutral_.topology_id())
        throw Error(ErrorCode::TopologyMismatch, "neutral mesh topology differs from the input mesh");
    camera_.validate();
    if (camera_.width != photo_.width || camera_.height != photo_.height)
        throw Error(ErrorCode::InvalidArgument, "camera size differs from the photo");
    config_.match.stations = config_.stations;
    config_.sketch.stations = config_.stations;
    has_expression_ = (mesh_.vertices - neutral_.vertices).cwiseAbs().maxCoeff() > 0.0;
    for (View v : {View::Frontal, View::Side}) {
        reference_[v] = project_curves(mesh_, view_camera(v));
        params_[v] = curve_params(reference_[v]);
    }
    context_ = SolverContext::prefactor(neutral_);
    basis_ = std::make_shared<LambdaBasis>(LambdaBasis::build(neutral_, config_.basis_smoothing));
}

Camera Session::view_camera(View view) const
{
    const Camera frontal = frontalize(camera_, mesh_);
    return view == View::Frontal ? frontal : frontal.side_view(mesh_);
}

SketchSet Session::sketch_locked(View view) const
{
    SketchSet s = project_curves(geometry_.current, view_camera(view));
    for (auto& [name, curve] : s.curves)
        curve.params = params_.at(view).at(name);
    return s;
}

SketchSet Session::sketch(View view) const
{
    std::lock_guard lock(mutex_);
    return sketch_locked(view);
}

EditPreview Session::preview_locked(View view, const Geometry& g) const
{
    const FaceMesh& mesh = g.current;
    EditPreview p;
    p.view = view;
    const Camera cam = view_camera(view);
    p.sketch = project_curves(mesh, cam);
    for (auto& [name, curve] : p.sketch.curves)
        curve.params = params_.at(view).at(name);
    p.projection.reserve(static_cast<std::size_t>(mesh.vertex_count()));
    for (int v = 0; v < mesh.vertex_count(); ++v)
        p.projection.push_back(cam.project(mesh.vertices.row(v).transpose()));
    const auto t = g.targets.find(view);
    p.max_station_error_px =
        t == g.targets.end() ? 0.0 : max_station_error(mesh, cam, t->second, params_.at(view), config_.stations);
    p.lambda_min = g.lambda.values.minCoeff();
    p.lambda_max = g.lambda.values.maxCoeff();
    return p;
}

EditPreview Session::preview(View view) const
{
    std::lock_guard lock(mutex_);
    return preview_locked(view, geometry_);
}

Session::Geometry Session::solve_geometry(const std::map<View, SketchSet>& targets, View view) const
{
    Geometry g;
    g.targets = targets;
    std::vector<ViewObservation> views;
    DisplacementSet edited_disp;
    stage("observe", [&] {
        for (const auto& [v, target] : targets) {
            ViewObservation obs;
            obs.camera = view_camera(v);
            obs.params = params_.at(v);
            obs.displacements = correspondence_displacements(reference_.at(v), target, config_.stations);
            if (v == view)
                edited_disp = obs.displacements;
            views.push_back(std::move(obs));
        }
        return 0;
    });
    if (predictor_) {
        g.lambda = stage("predict_lambda", [&] {
            if (!chart_)
                const_cast<Session*>(this)->chart_ =
                    std::make_shared<ParamChart>(ParamChart::build(neutral_, config_.chart_resolution));
            FlattenedMaps maps;
            flatten_laplacians(*chart_, compute_laplacians(neutral_), maps.laplacian_direction,
                               maps.laplacian_magnitude);
            flatten_sketch(*chart_, neutral_, edited_disp, params_.at(view), view_camera(view),
                           maps.sketch_direction, maps.sketch_magnitude);
            return run_external_predictor(maps, *predictor_, *chart_, config_.bounds);
        });
    } else {
        g.lambda = stage("estimate_lambda", [&] {
            return estimate_lambda(neutral_, views, *context_, *basis_, config_.estimator, config_.bounds).lambda;
        });
    }
    g.neutral_exaggerated =
        stage("exaggerate", [&] { return exaggerate(neutral_, g.lambda, *context_, config_.bounds); });
    g.expression_exaggerated = stage("deformation_transfer", [&] {
        return has_expression_ ? deformation_transfer(neutral_, mesh_, g.neutral_exaggerated) : g.neutral_exaggerated;
    });
    g.current = stage("match_sketch", [&] {
        return match_sketch(g.expression_exaggerated, view_camera(view), targets.at(view), *context_,
                            &params_.at(view), config_.match)
            .mesh;
    });
    return g;
}

EditPreview Session::edit(const SketchEdit& edit, View view)
{
    std::lock_guard lock(mutex_);
    // Edits apply to the stored target, which the current mesh meets within
    // the station tolerance; editing its reprojection would feed the
    // residual back into the next estimate.
    const auto t = geometry_.targets.find(view);
    const SketchSet current = t != geometry_.targets.end() ? t->second : sketch_locked(view);
    const SketchSet edited =
        stage("apply_edit", [&] { return apply_edit(current, edit, photo_.height, config_.sketch); });

    bool same = true;
    for (const auto& [name, curve] : current.curves)
        if (hausdorff_distance(curve.points, edited.curve(name).points) > 1e-3) {
            same = false;
            break;
        }
    if (same) {
        EditPreview p = preview_locked(view, geometry_);
        p.changed = false;
        return p;
    }

    auto targets = geometry_.targets;
    targets[view] = edited;
    Geometry g = solve_geometry(targets, view);
    EditPreview p = stage("reproject", [&] { return preview_locked(view, g); });
    // Commit only after every stage succeeded.
    geometry_ = std::move(g);
    ++version_;
    artifacts_ = Artifacts{};
    ++runs_["edit"];
    p.changed = true;
    return p;
}

const LightingResult& Session::lighting_locked()
{
    if (lighting_)
        return *lighting_;
    RenderOptions opts;
    opts.exclude_eyes_mouth = false;
    const RenderOutput base = render_textured(mesh_, mesh_, camera_, photo_, opts);
    Mask region = mask_or(base.region_mask(Region::Nose), base.region_mask(Region::Cheek));
    Raster normals = base.normals_before;
    normals.mask = base.mask.data;
    Raster gray = to_gray(photo_);
    const double count = static_cast<double>(region.count());
    const int f = std::max(1, static_cast<int>(std::ceil(std::sqrt(count / std::max(1, config_.lighting_max_pixels)))));
    if (f > 1) {
        Raster g2, n2;
        Mask r2;
        subsample_lighting(gray, normals, region, f, g2, n2, r2);
        lighting_ = estimate_lighting(g2, n2, r2, config_.lighting);
    } else {
        lighting_ = estimate_lighting(gray, normals, region, config_.lighting);
    }
    ++runs_["lighting"];
    return *lighting_;
}

Raster Session::synthesize(const std::atomic<bool>* cancel)
{
    std::lock_guard lock(mutex_);
    static const std::atomic<bool> never{false};
    Artifacts& a = artifacts_;
    auto clock = std::chrono::steady_clock::now();
    std::string last;
    auto lap = [&](const char* next) {
        const auto now = std::chrono::steady_clock::now();
        if (!last.empty())
            timings_[last] = std::chrono::duration<double, std::milli>(now - clock).count();
        clock = now;
        last = next;
    };
    const FaceMesh& current = geometry_.current;

    lap("render");
    check_cancel(cancel, never, "render");
    if (!a.render) {
        a.render = stage("render_textured", [&] { return render_textured(mesh_, current, camera_, photo_); });
        ++runs_["render"];
    }
    lap("enhance");
    check_cancel(cancel, never, "enhance");
    if (!a.enhanced) {
        a.enhanced = stage("enhance", [&] {
            if (!config_.enhance_detail)
                return a.render->color;
            const PatchPlan plan = plan_patches(a.render->mask, config_.patch, config_.patch_stride);
            if (plan.origins.empty())
                return a.render->color;
            EnhanceOptions opts;
            opts.workers = config_.enhance_workers;
            return enhance(
                a.render->color, a.render->stretch, plan,
                [](const Raster& p, const Raster& s) { return baseline_enhancer(p, s); }, opts);
        });
        ++runs_["enhance"];
    }
    lap("warp_background");
    check_cancel(cancel, never, "warp_background");
    if (!a.background) {
        a.background =
            stage("warp_background", [&] { return warp_background(photo_, mesh_, current, camera_, config_.warp).image; });
        ++runs_["background"];
    }
    lap("seam_cut");
    check_cancel(cancel, never, "seam_cut");
    if (!a.seam) {
        a.seam = stage("seam_cut", [&] {
            RenderOutput fg = *a.render;
            fg.color = *a.enhanced;
            return seam_cut(fg, *a.background, config_.seam);
        });
        ++runs_["seam"];
    }
    lap("poisson_blend");
    check_cancel(cancel, never, "poisson_blend");
    if (!a.blended) {
        a.blended =
            stage("poisson_blend", [&] { return poisson_blend(*a.enhanced, *a.background, *a.seam, config_.poisson); });
        ++runs_["blend"];
    }
    lap("fill_interior");
    check_cancel(cancel, never, "fill_interior");
    if (!a.filled) {
        a.filled = stage("fill_interior", [&] {
            const Mask target = mask_and(a.render->excluded, a.seam->labels);
            if (!target.any())
                return *a.blended;
            // Eye and mouth content comes from the photo, warped by the
            // motion of the visible eye and mouth vertices.
            const Eigen::MatrixX3d normals = camera_normals(current, camera_);
            std::vector<Eigen::Vector2d> src, dst;
            for (int v = 0; v < current.vertex_count(); ++v) {
                const Region r = current.region_labels[static_cast<std::size_t>(v)];
                if ((r != Region::Eyes && r != Region::Mouth) || normals(v, 2) >= 0.0)
                    continue;
                src.push_back(camera_.project(mesh_.vertices.row(v).transpose()));
                dst.push_back(camera_.project(current.vertices.row(v).transpose()));
            }
            Raster source = photo_;
            source.mask.clear();
            Raster blended = *a.blended;
            blended.mask.clear();
            return fill_interior(blended, source, target, src, dst, config_.fill);
        });
        ++runs_["fill"];
    }
    lap("estimate_lighting");
    check_cancel(cancel, never, "estimate_lighting");
    const LightingResult& light = stage("estimate_lighting", [&]() -> const LightingResult& { return lighting_locked(); });
    lap("build_alpha");
    check_cancel(cancel, never, "build_alpha");
    if (!a.alpha) {
        a.alpha = stage("build_alpha", [&] { return build_alpha(light.light, *a.render, config_.alpha); });
        ++runs_["alpha"];
    }
    lap("reshade");
    check_cancel(cancel, never, "reshade");
    if (!a.shaded) {
        a.shaded = stage("reshade", [&] { return reshade(*a.filled, *a.alpha); });
        a.result = a.shaded;
        a.post_edits = json::array();
        ++runs_["reshade"];
    }
    lap("");
    return *a.result;
}

bool Session::has_result() const
{
    std::lock_guard lock(mutex_);
    return artifacts_.result.has_value();
}

Raster Session::result() const
{
    std::lock_guard lock(mutex_);
    if (!artifacts_.result)
        throw Error(ErrorCode::NotFound, "session " + id_ + " has no result; run synthesize first");
    return *artifacts_.result;
}

void Session::ear_edit(const std::vector<Eigen::Vector2d>& boundary_curve, const std::vector<Eigen::Vector2d>& redrawn,
                       const EarEditOptions& options)
{
    std::lock_guard lock(mutex_);
    if (!artifacts_.result)
        throw Error(ErrorCode::NotFound, "ear edit needs a synthesized result");
    artifacts_.result = stage("ear_edit", [&] { return caric::ear_edit(*artifacts_.result, boundary_curve, redrawn, options); });
    artifacts_.post_edits.push_back(
        {{"type", "ear"}, {"boundary", points_to_json(boundary_curve)}, {"redrawn", points_to_json(redrawn)}});
    ++runs_["ear_edit"];
}

const std::vector<std::string>& mouth_template_names()
{
    static const std::vector<std::string> names{"closed", "open", "teeth"};
    return names;
}

Raster mouth_template(const std::string& kind, std::vector<Eigen::Vector2d>* outline)
{
    const auto& names = mouth_template_names();
    if (std::find(names.begin(), names.end(), kind) == names.end())
        throw Error(ErrorCode::InvalidArgument, "unknown mouth template '" + kind + "'");
    const int w = 160, h = 96;
    const double cx = 80, cy = 48, rx = 64, ry = 30;
    const Eigen::Vector3f lip(0.55f, 0.22f, 0.22f), dark(0.08f, 0.03f, 0.03f), tooth(0.85f, 0.83f, 0.78f),
        tongue(0.6f, 0.25f, 0.28f);
    Raster t(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
            const double r = u * u + v * v;
            Eigen::Vector3f c = lip;
            if (kind == "closed") {
                if (std::abs(v) < 0.08 * (1.0 - u * u))
                    c = dark;
            } else if (r < 0.55) {
                c = dark;
                if (kind == "teeth" && v < -0.25)
                    c = tooth;
                if (v > 0.35)
                    c = tongue;
            }
            for (int k = 0; k < 3; ++k)
                t.at(x, y, k) = c(k);
        }
    if (outline) {
        outline->clear();
        for (int k = 0; k < 32; ++k) {
            const double a = 2.0 * std::numbers::pi * k / 32.0;
            outline->emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
        }
    }
    return t;
}

Mask Session::mouth_target(const RenderOutput& render) const
{
    return mask_and(render.excluded, render.region_mask(Region::Mouth));
}

void Session::mouth_fill(const std::string& kind)
{
    std::lock_guard lock(mutex_);
    if (!artifacts_.result || !artifacts_.render)
        throw Error(ErrorCode::NotFound, "mouth fill needs a synthesized result");
    artifacts_.result = stage("mouth_fill", [&] {
        const Mask mouth = mouth_target(*artifacts_.render);
        if (!mouth.any())
            throw Error(ErrorCode::InsufficientRegion, "no visible mouth interior");
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (int y = 0; y < mouth.height; ++y)
            for (int x = 0; x < mouth.width; ++x)
                if (mouth(x, y)) {
                    x0 = std::min(x0, x + 0.0);
                    x1 = std::max(x1, x + 1.0);
                    y0 = std::min(y0, y + 0.0);
                    y1 = std::max(y1, y + 1.0);
                }
        const Eigen::Vector2d c(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        const double rx = std::max(2.0, 0.5 * (x1 - x0)), ry = std::max(2.0, 0.5 * (y1 - y0));

        std::vector<Eigen::Vector2d> outline;
        const Raster tmpl = mouth_template(kind, &outline);
        // The template opening (64 x 30 px) is scaled onto the target box.
        const double sx = rx / 64.0, sy = ry / 30.0;
        const int tw = std::max(2, static_cast<int>(std::lround(tmpl.width * sx)));
        const int th = std::max(2, static_cast<int>(std::lround(tmpl.height * sy)));
        const Raster scaled = resize(tmpl, tw, th);
        Raster source = *artifacts_.result;
        source.mask.clear();
        const int ox = static_cast<int>(std::lround(c.x() - 80.0 * sx)), oy = static_cast<int>(std::lround(c.y() - 48.0 * sy));
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x) {
                const int px = ox + x, py = oy + y;
                if (px < 0 || py < 0 || px >= source.width || py >= source.height)
                    continue;
                for (int k = 0; k < 3; ++k)
                    source.at(px, py, k) = scaled.at(x, y, k);
            }
        std::vector<Eigen::Vector2d> src, dst;
        for (std::size_t k = 0; k < outline.size(); ++k) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(outline.size());
            src.push_back(Eigen::Vector2d(ox + outline[k].x() * tw / tmpl.width, oy + outline[k].y() * th / tmpl.height));
            dst.push_back(c + Eigen::Vector2d(rx * std::cos(a), ry * std::sin(a)));
        }
        Mask target(mouth.width, mouth.height);
        for (int y = 0; y < mouth.height; ++y)
            for (int x = 0; x < mouth.width; ++x) {
                const double u = (x + 0.5 - c.x()) / rx, v = (y + 0.5 - c.y()) / ry;
                if (u * u + v * v <= 1.0 && x > 0 && y > 0 && x + 1 < mouth.width && y + 1 < mouth.height)
                    target.set(x, y, true);
            }
        Raster composite = *artifacts_.result;
        composite.mask.clear();
        return fill_interior(composite, source, target, src, dst, config_.fill);
    });
    artifacts_.post_edits.push_back({{"type", "mouth"}, {"template", kind}});
    ++runs_["mouth_fill"];
}

std::map<std::string, Raster> Session::stage_images() const
{
    std::lock_guard lock(mutex_);
    const Artifacts& a = artifacts_;
    if (!a.result)
        throw Error(ErrorCode::NotFound, "no synthesized stages");
    return {
        {"render", a.render->color}, {"enhanced", *a.enhanced}, {"background", *a.background},
        {"composite", *a.filled},    {"alpha", *a.alpha},       {"result", *a.result},
    };
}

void Session::dump_stages(const fs::path& dir) const
{
    fs::create_directories(dir);
    const auto images = stage_images();
    int k = 1;
    for (const auto& name : dumped_stage_names()) {
        const Raster& r = images.at(name);
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%02d_", k++);
        if (name == "alpha") {
            // alpha in [lo, hi] shown with 1 at mid grey
            Raster vis(r.width, r.height, 1);
            for (std::size_t p = 0; p < r.data.size(); ++p)
                vis.data[p] = std::clamp(0.5f * r.data[p], 0.0f, 1.0f);
            save_png(dir / (prefix + name + ".png"), vis, Transfer::Linear);
        } else {
            save_png(dir / (prefix + name + ".png"), r);
        }
        write_raster(dir / (prefix + name + ".crst"), r);
    }
}

std::map<std::string, int> Session::stage_runs() const
{
    std::lock_guard lock(mutex_);
    return runs_;
}

std::map<std::string, double> Session::stage_timings() const
{
    std::lock_guard lock(mutex_);
    return timings_;
}

LambdaField Session::lambda() const
{
    std::lock_guard lock(mutex_);
    return geometry_.lambda;
}

FaceMesh Session::input_mesh() const
{
    std::lock_guard lock(mutex_);
    return mesh_;
}

FaceMesh Session::current_mesh() const
{
    std::lock_guard lock(mutex_);
    return geometry_.current;
}

Raster Session::photo() const
{
    std::lock_guard lock(mutex_);
    return photo_;
}

int Session::version() const
{
    std::lock_guard lock(mutex_);
    return version_;
}

void Session::set_predictor(std::shared_ptr<LambdaPredictor> predictor)
{
    std::lock_guard lock(mutex_);
    predictor_ = std::move(predictor);
}

void Session::save(const fs::path& dir) const
{
    std::lock_guard lock(mutex_);
    fs::create_directories(dir);
    write_bytes(dir / "photo.crst", encode_raster(photo_));
    write_bytes(dir / "mesh.obj", write_obj(mesh_.vertices, mesh_.triangles));
    write_bytes(dir / "mesh.json", sidecar_to_json(mesh_).dump(1) + "\n");
    save_vertices(dir / "neutral.obj", neutral_);
    save_vertices(dir / "neutral_exaggerated.obj", geometry_.neutral_exaggerated);
    save_vertices(dir / "expression_exaggerated.obj", geometry_.expression_exaggerated);
    save_vertices(dir / "current.obj", geometry_.current);

    const Artifacts& a = artifacts_;
    json artifacts = json::object();
    auto put = [&](const char* name, const std::optional<Raster>& r) {
        const fs::path p = dir / (std::string(name) + ".crst");
        if (r) {
            write_bytes(p, encode_raster(*r));
            artifacts[name] = true;
        } else {
            fs::remove(p);
        }
    };
    if (a.render) {
        save_render(dir, *a.render);
        artifacts["render"] = true;
    }
    put("enhanced", a.enhanced);
    put("background", a.background);
    if (a.seam) {
        write_bytes(dir / "seam_labels.crst", encode_raster(mask_raster(a.seam->labels)));
        write_bytes(dir / "seam_band.crst", encode_raster(mask_raster(a.seam->band)));
        write_bytes(dir / "seam_blend.crst", encode_raster(mask_raster(a.seam->blend_mask)));
        artifacts["seam"] = a.seam->cost;
    }
    put("blended", a.blended);
    put("filled", a.filled);
    put("alpha", a.alpha);
    put("shaded", a.shaded);
    put("result", a.result);

    json lighting = nullptr;
    if (lighting_) {
        std::vector<double> coeffs(lighting_->light.coeffs.data(), lighting_->light.coeffs.data() + 9);
        lighting = {{"coeffs", coeffs}, {"objective", lighting_->objective}, {"pixels", lighting_->pixels}};
        write_bytes(dir / "lighting_albedo.crst", encode_raster(lighting_->albedo));
    }
    json targets = json::object();
    for (const auto& [v, s] : geometry_.targets)
        targets[std::string(view_name(v))] = sketch_to_json(s);
    std::vector<double> lambda(geometry_.lambda.values.data(),
                               geometry_.lambda.values.data() + geometry_.lambda.values.size());
    const json manifest = {
        {"format", 1},
        {"id", id_},
        {"version", version_},
        {"camera", camera_to_json(camera_)},
        {"config", config_to_json(config_)},
        {"lambda", lambda},
        {"targets", targets},
        {"artifacts", artifacts},
        {"post_edits", a.post_edits},
        {"lighting", lighting},
        {"stage_runs", runs_},
    };
    // The manifest goes last: a directory without one is not a session.
    write_bytes(dir / "session.json", manifest.dump(1) + "\n");
}

std::shared_ptr<Session> Session::load(const fs::path& dir)
{
    const fs::path manifest_path = dir / "session.json";
    if (!fs::exists(manifest_path))
        throw Error(ErrorCode::NotFound, "no session at " + dir.string());
    json m;
    try {
        m = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, "bad session manifest: " + std::string(e.what()));
    }
    std::shared_ptr<Session> s(new Session());
    s->id_ = m.at("id").get<std::string>();
    s->config_ = config_from_json(m.at("config"));
    s->photo_ = read_raster(dir / "photo.crst");
    s->mesh_ = load_face_mesh(dir / "mesh.obj", dir / "mesh.json");
    s->neutral_ = load_vertices(dir / "neutral.obj", s->mesh_);
    s->camera_ = camera_from_json(m.at("camera"));
    s->prepare();

    Geometry& g = s->geometry_;
    const auto lambda = m.at("lambda").get<std::vector<double>>();
    g.lambda.values = Eigen::Map<const Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
    g.lambda.topology_id = s->neutral_.topology_id();
    g.neutral_exaggerated = load_vertices(dir / "neutral_exaggerated.obj", s->mesh_);
    g.expression_exaggerated = load_vertices(dir / "expression_exaggerated.obj", s->mesh_);
    g.current = load_vertices(dir / "current.obj", s->mesh_);
    for (const auto& [name, sk] : m.at("targets").items())
        g.targets[view_from_name(name)] = sketch_from_json(sk);
    s->version_ = m.at("version").get<int>();

    Artifacts& a = s->artifacts_;
    const json& have = m.at("artifacts");
    auto get = [&](const char* name, std::optional<Raster>& r) {
        if (have.contains(name))
            r = read_raster(dir / (std::string(name) + ".crst"));
    };
    if (have.contains("render"))
        a.render = load_render(dir);
    get("enhanced", a.enhanced);
    get("background", a.background);
    if (have.contains("seam")) {
        SeamResult seam;
        seam.labels = raster_mask(read_raster(dir / "seam_labels.crst"));
        seam.band = raster_mask(read_raster(dir / "seam_band.crst"));
        seam.blend_mask = raster_mask(read_raster(dir / "seam_blend.crst"));
        seam.cost = have.at("seam").get<double>();
        a.seam = std::move(seam);
    }
    get("blended", a.blended);
    get("filled", a.filled);
    get("alpha", a.alpha);
    get("shaded", a.shaded);
    get("result", a.result);
    a.post_edits = m.at("post_edits");

    if (!m.at("lighting").is_null()) {
        const json& l = m.at("lighting");
        LightingResult r;
        const auto c = l.at("coeffs").get<std::vector<double>>();
        for (int k = 0; k < 9; ++k)
            r.light.coeffs(k) = c.at(static_cast<std::size_t>(k));
        r.objective = l.at("objective").get<std::vector<double>>();
        r.pixels = l.at("pixels").get<int>();
        r.albedo = read_raster(dir / "lighting_albedo.crst");
        s->lighting_ = std::move(r);
    }
    s->runs_ = m.at("stage_runs").get<std::map<std::string, int>>();
    return s;
}

std::shared_ptr<Session> make_demo_session(const std::string& id, const DemoConfig& demo, const SessionConfig& config)
{
    FaceShapeParams params;
    params.rows = demo.rows;
    params.cols = demo.cols;
    params.seed = demo.seed;
    FaceMesh neutral = make_face_mesh(params);
    FaceMesh mesh = make_face_mesh(params, demo.expression);
    const Camera camera = fit_frontal_camera(mesh, demo.width, demo.height);
    Portrait portrait = make_portrait(mesh, camera, default_lighting(), demo.seed);
    return std::make_shared<Session>(id, std::move(portrait.image), std::move(mesh), std::move(neutral), camera, config);
}

std::string SessionStore::next_id()
{
    std::lock_guard lock(mutex_);
    for (;;) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(++counter_));
        const std::string id = buf;
        if (sessions_.count(id))
            continue;
        if (!root_.empty() && fs::exists(root_ / id))
            continue;
        return id;
    }
}

std::string SessionStore::add(std::shared_ptr<Session> session)
{
    const std::string id = session->id();
    {
        std::lock_guard lock(mutex_);
        if (sessions_.count(id))
            throw Error(ErrorCode::InvalidArgument, "session " + id + " already exists");
        sessions_[id] = session;
    }
    persist(*session);
    return id;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id)
{
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it != sessions_.end())
        return it->second;
    const bool safe = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
    if (safe && !root_.empty() && fs::exists(root_ / id / "session.json")) {
        auto s = Session::load(root_ / id);
        sessions_[id] = s;
        return s;
    }
    throw Error(ErrorCode::NotFound, "no session '" + id + "'");
}

void SessionStore::persist(const Session& session) const
{
    if (!root_.empty())
        session.save(root_ / session.id());
}

} // namespace caric
