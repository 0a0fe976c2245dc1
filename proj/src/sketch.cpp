#include "caric/sketch.hpp"

#include "caric/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace caric {

namespace {

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

double polyline_distance(const Eigen::Vector2d& p, const Polyline& line)
{
    if (line.size() == 1)
        return (line[0] - p).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
        best = std::min(best, segment_distance(p, line[i], line[i + 1]));
    return best;
}

// Index of the segment [i, i+1] containing t, for non-decreasing params.
std::size_t segment_for(const std::vector<double>& params, double t)
{
    const auto it = std::upper_bound(params.begin(), params.end(), t);
    std::size_t i = it == params.begin() ? 0 : static_cast<std::size_t>(it - params.begin()) - 1;
    return std::min(i, params.size() - 2);
}

void check_params(const SketchCurve& curve)
{
    if (curve.points.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "curve '" + curve.name + "' needs at least two points");
    if (curve.params.size() != curve.points.size())
        throw Error(ErrorCode::InvalidArgument, "curve '" + curve.name + "' has mismatched params");
    for (std::size_t i = 1; i < curve.params.size(); ++i) {
        if (curve.params[i] < curve.params[i - 1])
            throw Error(ErrorCode::InvalidArgument, "curve '" + curve.name + "' params must be non-decreasing");
    }
}

Polyline dedupe(const Polyline& in)
{
    Polyline out;
    for (const auto& p : in) {
        if (!p.allFinite())
            throw Error(ErrorCode::NonFinite, "replacement stroke has non-finite points");
        if (out.empty() || (p - out.back()).norm() > 1e-9)
            out.push_back(p);
    }
    return out;
}

Eigen::Vector2d point_from_json(const nlohmann::json& j)
{
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

Eigen::Vector2d SketchCurve::at(double t) const
{
    if (points.size() == 1)
        return points[0];
    const std::size_t i = segment_for(params, t);
    const double span = params[i + 1] - params[i];
    const double w = span > 0.0 ? std::clamp((t - params[i]) / span, 0.0, 1.0) : 0.0;
    return (1.0 - w) * points[i] + w * points[i + 1];
}

double SketchCurve::length() const
{
    double len = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        len += (points[i] - points[i - 1]).norm();
    return len;
}

const SketchCurve& SketchSet::curve(const std::string& name) const
{
    const auto it = curves.find(name);
    if (it == curves.end())
        throw Error(ErrorCode::MissingCurve, "sketch has no curve '" + name + "'");
    return it->second;
}

std::vector<double> arc_length_params(const Polyline& points)
{
    std::vector<double> params(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i)
        params[i] = params[i - 1] + (points[i] - points[i - 1]).norm();
    const double total = params.empty() ? 0.0 : params.back();
    if (total > 0.0) {
        for (double& p : params)
            p /= total;
        params.back() = 1.0;
    } else if (points.size() > 1) {
        for (std::size_t i = 0; i < points.size(); ++i)
            params[i] = static_cast<double>(i) / static_cast<double>(points.size() - 1);
    }
    return params;
}

SketchSet project_curves(const FaceMesh& mesh, const Camera& camera)
{
    SketchSet sketch;
    sketch.view = camera.view;
    for (const auto& [name, path] : mesh.feature_curves) {
        SketchCurve curve;
        curve.name = name;
        curve.closed = path.size() > 2 && path.front() == path.back();
        curve.points.reserve(path.size());
        for (int v : path)
            curve.points.push_back(camera.project(mesh.vertices.row(v).transpose()));
        curve.params = arc_length_params(curve.points);
        sketch.curves.emplace(name, std::move(curve));
    }
    return sketch;
}

CurveParams curve_params(const SketchSet& projected)
{
    CurveParams params;
    for (const auto& [name, curve] : projected.curves)
        params.emplace(name, curve.params);
    return params;
}

SketchSet apply_edit(const SketchSet& sketch, const SketchEdit& edit, int image_height, const SketchConfig& config)
{
    const SketchCurve& curve = sketch.curve(edit.curve);
    check_params(curve);
    if (!(edit.s0 >= 0.0 && edit.s0 < edit.s1 && edit.s1 <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "erased interval must satisfy 0 <= s0 < s1 <= 1");
    Polyline repl = dedupe(edit.replacement);
    if (repl.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "replacement needs at least two distinct points");

    const double t0 = curve.params.front() + edit.s0 * (curve.params.back() - curve.params.front());
    const double t1 = curve.params.front() + edit.s1 * (curve.params.back() - curve.params.front());
    const bool snap_start = curve.closed || edit.s0 > 0.0;
    const bool snap_end = curve.closed || edit.s1 < 1.0;
    const double radius = config.snap_radius(image_height);

    Eigen::Vector2d d0 = Eigen::Vector2d::Zero(), d1 = Eigen::Vector2d::Zero();
    if (snap_start) {
        d0 = curve.at(t0) - repl.front();
        if (d0.norm() > radius)
            throw Error(ErrorCode::Unsnappable, "replacement start is " + std::to_string(d0.norm()) +
                                                    " px from the erased interval (snap radius " +
                                                    std::to_string(radius) + " px)");
    }
    if (snap_end) {
        d1 = curve.at(t1) - repl.back();
        if (d1.norm() > radius)
            throw Error(ErrorCode::Unsnappable, "replacement end is " + std::to_string(d1.norm()) +
                                                    " px from the erased interval (snap radius " +
                                                    std::to_string(radius) + " px)");
    }
    const std::vector<double> u = arc_length_params(repl);
    for (std::size_t i = 0; i < repl.size(); ++i)
        repl[i] += (1.0 - u[i]) * d0 + u[i] * d1;
    if (snap_start)
        repl.front() = curve.at(t0);
    if (snap_end)
        repl.back() = curve.at(t1);

    SketchCurve out;
    out.name = curve.name;
    out.closed = curve.closed;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (curve.params[i] < t0) {
            out.points.push_back(curve.points[i]);
            out.params.push_back(curve.params[i]);
        }
    }
    for (std::size_t i = 0; i < repl.size(); ++i) {
        out.points.push_back(repl[i]);
        out.params.push_back(i + 1 == repl.size() ? t1 : t0 + u[i] * (t1 - t0));
    }
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (curve.params[i] > t1) {
            out.points.push_back(curve.points[i]);
            out.params.push_back(curve.params[i]);
        }
    }
    if (out.closed)
        out.points.back() = out.points.front();

    SketchSet result = sketch;
    result.curves[edit.curve] = std::move(out);
    return result;
}

std::vector<Eigen::Vector2d> resample(const SketchCurve& curve, int stations)
{
    check_params(curve);
    if (stations < 2)
        throw Error(ErrorCode::InvalidArgument, "need at least two stations");
    std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(stations));
    for (int k = 0; k < stations; ++k)
        out[static_cast<std::size_t>(k)] = curve.at(static_cast<double>(k) / (stations - 1));
    return out;
}

DisplacementSet correspondence_displacements(const SketchSet& base, const SketchSet& edited, int stations)
{
    if (base.view != edited.view)
        throw Error(ErrorCode::InvalidArgument, "sketches belong to different views");
    DisplacementSet set;
    set.view = base.view;
    set.stations = stations;
    for (const auto& [name, curve] : base.curves) {
        const auto a = resample(curve, stations);
        const auto b = resample(edited.curve(name), stations);
        std::vector<Eigen::Vector2d> d(a.size());
        for (std::size_t k = 0; k < a.size(); ++k)
            d[k] = b[k] - a[k];
        set.curves.emplace(name, std::move(d));
    }
    for (const auto& [name, curve] : edited.curves) {
        if (!base.curves.count(name))
            throw Error(ErrorCode::MissingCurve, "base sketch has no curve '" + name + "'");
    }
    return set;
}

std::vector<StationSample> locate_stations(const std::vector<int>& path, const std::vector<double>& params, int stations)
{
    if (path.size() < 2 || params.size() != path.size())
        throw Error(ErrorCode::InvalidArgument, "station lookup needs a path with matching params");
    std::vector<StationSample> out(static_cast<std::size_t>(stations));
    for (int k = 0; k < stations; ++k) {
        const double t = static_cast<double>(k) / (stations - 1);
        const std::size_t i = segment_for(params, t);
        const double span = params[i + 1] - params[i];
        const double w = span > 0.0 ? std::clamp((t - params[i]) / span, 0.0, 1.0) : 0.0;
        out[static_cast<std::size_t>(k)] = {path[i], path[i + 1], w};
    }
    return out;
}

std::map<std::string, std::vector<Eigen::Vector2d>> project_stations(const FaceMesh& mesh, const Camera& camera,
                                                                     const CurveParams& params, int stations)
{
    std::map<std::string, std::vector<Eigen::Vector2d>> out;
    for (const auto& [name, p] : params) {
        const auto it = mesh.feature_curves.find(name);
        if (it == mesh.feature_curves.end())
            throw Error(ErrorCode::MissingCurve, "mesh has no feature curve '" + name + "'");
        const auto samples = locate_stations(it->second, p, stations);
        std::vector<Eigen::Vector2d> pts;
        pts.reserve(samples.size());
        for (const auto& s : samples) {
            const Eigen::Vector3d x = (1.0 - s.w) * mesh.vertices.row(s.a).transpose() + s.w * mesh.vertices.row(s.b).transpose();
            pts.push_back(camera.project(x));
        }
        out.emplace(name, std::move(pts));
    }
    return out;
}

nlohmann::json sketch_to_json(const SketchSet& sketch)
{
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& [name, curve] : sketch.curves) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : curve.points)
            pts.push_back({p.x(), p.y()});
        curves.push_back({{"name", name}, {"points", pts}, {"closed", curve.closed}, {"params", curve.params}});
    }
    return {{"view", std::string(view_name(sketch.view))}, {"curves", curves}};
}

SketchSet sketch_from_json(const nlohmann::json& json)
{
    SketchSet sketch;
    try {
        sketch.view = view_from_name(json.value("view", std::string("frontal")));
        for (const auto& c : json.at("curves")) {
            SketchCurve curve;
            curve.name = c.at("name").get<std::string>();
            curve.closed = c.value("closed", false);
            for (const auto& p : c.at("points"))
                curve.points.push_back(point_from_json(p));
            if (c.contains("params"))
                curve.params = c.at("params").get<std::vector<double>>();
            else
                curve.params = arc_length_params(curve.points);
            check_params(curve);
            if (curve.closed && (curve.points.front() - curve.points.back()).norm() > 1e-9)
                throw Error(ErrorCode::InvalidArgument, "closed curve '" + curve.name + "' must end where it starts");
            if (!sketch.curves.emplace(curve.name, curve).second)
                throw Error(ErrorCode::InvalidArgument, "duplicate curve '" + curve.name + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, std::string("malformed sketch: ") + e.what());
    }
    return sketch;
}

nlohmann::json edit_to_json(const SketchEdit& edit)
{
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : edit.replacement)
        pts.push_back({p.x(), p.y()});
    return {{"curve", edit.curve}, {"s0", edit.s0}, {"s1", edit.s1}, {"replacement", pts}};
}

SketchEdit edit_from_json(const nlohmann::json& json)
{
    SketchEdit edit;
    try {
        edit.curve = json.at("curve").get<std::string>();
        edit.s0 = json.at("s0").get<double>();
        edit.s1 = json.at("s1").get<double>();
        for (const auto& p : json.at("replacement"))
            edit.replacement.push_back(point_from_json(p));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, std::string("malformed edit: ") + e.what());
    }
    return edit;
}

nlohmann::json displacements_to_json(const DisplacementSet& set)
{
    nlohmann::json curves = nlohmann::json::object();
    for (const auto& [name, d] : set.curves) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : d)
            arr.push_back({v.x(), v.y()});
        curves[name] = arr;
    }
    return {{"view", std::string(view_name(set.view))}, {"stations", set.stations}, {"curves", curves}};
}

double hausdorff_distance(const Polyline& a, const Polyline& b)
{
    // Densify both lines so the vertex-to-polyline distance approximates the
    // continuous one to well below a pixel.
    auto densify = [](const Polyline& line) {
        Polyline out;
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
            const int steps = std::max(1, static_cast<int>(std::ceil((line[i + 1] - line[i]).norm() / 0.1)));
            for (int s = 0; s < steps; ++s)
                out.push_back(line[i] + (line[i + 1] - line[i]) * (static_cast<double>(s) / steps));
        }
        out.push_back(line.back());
        return out;
    };
    double h = 0.0;
    for (const auto& p : densify(a))
        h = std::max(h, polyline_distance(p, b));
    for (const auto& p : densify(b))
        h = std::max(h, polyline_distance(p, a));
    return h;
}

} // namespace caric
