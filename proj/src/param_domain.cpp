#include "caric/param_domain.hpp"

#include "caric/error.hpp"
#include "caric/image_io.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace caric {

namespace {

constexpr float kSentinel = 0.5f;

void check_resolution(int resolution)
{
    if (resolution < 16)
        throw Error(ErrorCode::InvalidArgument, "chart resolution must be at least 16");
}

Raster masked(const ParamChart& chart, int channels)
{
    Raster r(chart.resolution, chart.resolution, channels);
    r.mask.resize(r.pixel_count());
    for (std::size_t i = 0; i < r.mask.size(); ++i)
        r.mask[i] = chart.pixel_triangle[i] >= 0 ? 1 : 0;
    return r;
}

void check_chart_raster(const ParamChart& chart, const Raster& raster)
{
    if (raster.width != chart.resolution || raster.height != chart.resolution)
        throw Error(ErrorCode::ContractViolation, "raster resolution " + std::to_string(raster.width) + "x" +
                                                      std::to_string(raster.height) + " does not match chart " +
                                                      std::to_string(chart.resolution));
}

} // namespace

float encode_direction(double component)
{
    return static_cast<float>(0.5 * (component + 1.0));
}

double decode_direction(float channel)
{
    return 2.0 * static_cast<double>(channel) - 1.0;
}

Mask ParamChart::mask() const
{
    Mask m(resolution, resolution);
    for (std::size_t i = 0; i < pixel_triangle.size(); ++i)
        m.data[i] = pixel_triangle[i] >= 0 ? 1 : 0;
    return m;
}

std::size_t ParamChart::valid_count() const
{
    return static_cast<std::size_t>(std::count_if(pixel_triangle.begin(), pixel_triangle.end(), [](int t) { return t >= 0; }));
}

Eigen::MatrixX2d tutte_embedding(const FaceMesh& mesh)
{
    const int n = mesh.vertex_count();
    const auto loops = boundary_loops(mesh, std::vector<bool>(static_cast<std::size_t>(mesh.triangle_count()), true));
    if (loops.size() != 1)
        throw Error(ErrorCode::InvalidMesh, "a Tutte chart needs exactly one boundary loop, found " + std::to_string(loops.size()));
    const auto& loop = loops.front();

    Eigen::MatrixX2d uv = Eigen::MatrixX2d::Zero(n, 2);
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    std::vector<double> acc(loop.size(), 0.0);
    for (std::size_t i = 1; i < loop.size(); ++i)
        acc[i] = acc[i - 1] + (mesh.vertices.row(loop[i]) - mesh.vertices.row(loop[i - 1])).norm();
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        const double angle = 2.0 * M_PI * acc[i] / acc.back();
        uv(loop[i], 0) = 0.5 + 0.48 * std::cos(angle);
        uv(loop[i], 1) = 0.5 + 0.48 * std::sin(angle);
        fixed[static_cast<std::size_t>(loop[i])] = true;
    }

    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    int free_count = 0;
    for (int v = 0; v < n; ++v)
        if (!fixed[static_cast<std::size_t>(v)])
            slot[static_cast<std::size_t>(v)] = free_count++;
    if (free_count == 0)
        return uv;

    const auto rings = vertex_neighbors(mesh);
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(free_count, 2);
    for (int v = 0; v < n; ++v) {
        const int row = slot[static_cast<std::size_t>(v)];
        if (row < 0)
            continue;
        const auto& ring = rings[static_cast<std::size_t>(v)];
        entries.emplace_back(row, row, static_cast<double>(ring.size()));
        for (int u : ring) {
            if (slot[static_cast<std::size_t>(u)] >= 0)
                entries.emplace_back(row, slot[static_cast<std::size_t>(u)], -1.0);
            else
                rhs.row(row) += uv.row(u);
        }
    }
    Eigen::SparseMatrix<double> system(free_count, free_count);
    system.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(system);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "Tutte system is singular");
    const Eigen::MatrixX2d solved = lu.solve(rhs);
    for (int v = 0; v < n; ++v)
        if (slot[static_cast<std::size_t>(v)] >= 0)
            uv.row(v) = solved.row(slot[static_cast<std::size_t>(v)]);
    return uv;
}

ParamChart ParamChart::build(const FaceMesh& mesh, int resolution)
{
    return build(mesh, mesh.chart_uv.rows() == mesh.vertex_count() ? mesh.chart_uv : tutte_embedding(mesh), resolution);
}

ParamChart ParamChart::build(const FaceMesh& mesh, const Eigen::MatrixX2d& uv, int resolution)
{
    check_resolution(resolution);
    if (uv.rows() != mesh.vertex_count())
        throw Error(ErrorCode::InvalidArgument, "chart uv count differs from vertex count");
    ParamChart chart;
    chart.resolution = resolution;
    chart.topology_id = mesh.topology_id();
    chart.uv = uv;
    chart.triangles = mesh.triangles;
    const std::size_t pixels = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    chart.pixel_triangle.assign(pixels, -1);
    chart.pixel_bary.assign(pixels, Eigen::Vector3f::Zero());

    const double r = resolution;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const Eigen::Vector2d a = uv.row(mesh.triangles(t, 0)).transpose() * r;
        const Eigen::Vector2d b = uv.row(mesh.triangles(t, 1)).transpose() * r;
        const Eigen::Vector2d c = uv.row(mesh.triangles(t, 2)).transpose() * r;
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(area) < 1e-14)
            throw Error(ErrorCode::DegenerateTriangle, "chart triangle " + std::to_string(t) + " is degenerate");
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double wa = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
                const double wb = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
                const double wc = 1.0 - wa - wb;
                if (wa < -1e-9 || wb < -1e-9 || wc < -1e-9)
                    continue;
                const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(resolution) + static_cast<std::size_t>(x);
                if (chart.pixel_triangle[idx] >= 0)
                    continue;
                chart.pixel_triangle[idx] = t;
                chart.pixel_bary[idx] = Eigen::Vector3f(static_cast<float>(wa), static_cast<float>(wb), static_cast<float>(wc));
            }
        }
    }
    return chart;
}

std::map<std::string, Raster> FlattenedMaps::as_bundle() const
{
    return {{"L_d", laplacian_direction}, {"L_m", laplacian_magnitude}, {"S_d", sketch_direction}, {"S_m", sketch_magnitude}};
}

FlattenedMaps FlattenedMaps::from_bundle(const std::map<std::string, Raster>& bundle)
{
    auto get = [&](const char* name, int channels) {
        const auto it = bundle.find(name);
        if (it == bundle.end())
            throw Error(ErrorCode::ContractViolation, std::string("bundle is missing ") + name);
        if (it->second.channels != channels)
            throw Error(ErrorCode::ContractViolation, std::string(name) + " has the wrong channel count");
        return it->second;
    };
    FlattenedMaps maps;
    maps.laplacian_direction = get("L_d", 3);
    maps.laplacian_magnitude = get("L_m", 1);
    maps.sketch_direction = get("S_d", 2);
    maps.sketch_magnitude = get("S_m", 1);
    return maps;
}

Raster flatten_vertex_field(const ParamChart& chart, const Eigen::MatrixXd& field)
{
    if (field.rows() != chart.uv.rows())
        throw Error(ErrorCode::InvalidArgument, "field length differs from vertex count");
    const int channels = static_cast<int>(field.cols());
    Raster out = masked(chart, channels);
    for (std::size_t i = 0; i < chart.pixel_triangle.size(); ++i) {
        const int t = chart.pixel_triangle[i];
        if (t < 0)
            continue;
        const Eigen::Vector3f& w = chart.pixel_bary[i];
        for (int c = 0; c < channels; ++c) {
            const double v = w[0] * field(chart.triangles(t, 0), c) + w[1] * field(chart.triangles(t, 1), c) +
                             w[2] * field(chart.triangles(t, 2), c);
            out.data[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] = static_cast<float>(v);
        }
    }
    return out;
}

void flatten_vector_field(const ParamChart& chart, const Eigen::MatrixXd& field, Raster& direction, Raster& magnitude)
{
    const Raster vec = flatten_vertex_field(chart, field);
    const int channels = vec.channels;
    direction = masked(chart, channels);
    magnitude = masked(chart, 1);
    for (std::size_t i = 0; i < vec.pixel_count(); ++i) {
        double norm2 = 0.0;
        for (int c = 0; c < channels; ++c)
            norm2 += static_cast<double>(vec.data[i * channels + c]) * vec.data[i * channels + c];
        const double norm = std::sqrt(norm2);
        magnitude.data[i] = static_cast<float>(norm);
        for (int c = 0; c < channels; ++c)
            direction.data[i * channels + c] = norm > 0.0 ? encode_direction(vec.data[i * channels + c] / norm) : kSentinel;
    }
}

Eigen::MatrixXd sample_field(const ParamChart& chart, const Raster& raster)
{
    check_chart_raster(chart, raster);
    const int r = chart.resolution;
    const int channels = raster.channels;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(chart.uv.rows(), channels);
    for (Eigen::Index v = 0; v < chart.uv.rows(); ++v) {
        const double fx = chart.uv(v, 0) * r - 0.5;
        const double fy = chart.uv(v, 1) * r - 0.5;
        const int x0 = static_cast<int>(std::floor(fx));
        const int y0 = static_cast<int>(std::floor(fy));
        const double ax = fx - x0, ay = fy - y0;
        double total = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
                const int x = x0 + dx, y = y0 + dy;
                if (x < 0 || y < 0 || x >= r || y >= r || !chart.valid(x, y))
                    continue;
                const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
                if (w <= 0.0)
                    continue;
                total += w;
                for (int c = 0; c < channels; ++c)
                    out(v, c) += w * raster.at(x, y, c);
            }
        }
        if (total > 0.0) {
            out.row(v) /= total;
            continue;
        }
        // No covered pixel around this uv: take the nearest covered one.
        const int cx = std::clamp(static_cast<int>(std::lround(fx)), 0, r - 1);
        const int cy = std::clamp(static_cast<int>(std::lround(fy)), 0, r - 1);
        bool found = false;
        for (int radius = 1; radius < r && !found; ++radius) {
            double best = std::numeric_limits<double>::infinity();
            int bx = -1, by = -1;
            for (int y = std::max(0, cy - radius); y <= std::min(r - 1, cy + radius); ++y)
                for (int x = std::max(0, cx - radius); x <= std::min(r - 1, cx + radius); ++x)
                    if (chart.valid(x, y)) {
                        const double d = (x - fx) * (x - fx) + (y - fy) * (y - fy);
                        if (d < best) {
                            best = d;
                            bx = x;
                            by = y;
                        }
                    }
            if (bx >= 0) {
                for (int c = 0; c < channels; ++c)
                    out(v, c) = raster.at(bx, by, c);
                found = true;
            }
        }
    }
    return out;
}

LambdaField lambda_from_map(const ParamChart& chart, const Raster& map, const LambdaBounds& bounds)
{
    check_chart_raster(chart, map);
    if (map.channels != 1)
        throw Error(ErrorCode::ContractViolation, "lambda map must have one channel");
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            if (chart.valid(x, y) && !std::isfinite(map.at(x, y)))
                throw Error(ErrorCode::ContractViolation, "lambda map has a non-finite value at pixel (" +
                                                              std::to_string(x) + ", " + std::to_string(y) + ")");
    const Eigen::MatrixXd values = sample_field(chart, map);
    LambdaField field;
    field.topology_id = chart.topology_id;
    field.values = values.col(0).unaryExpr([&](double v) { return bounds.clamp(v); });
    return field;
}

Raster lambda_to_map(const ParamChart& chart, const LambdaField& lambda)
{
    if (lambda.topology_id != chart.topology_id)
        throw Error(ErrorCode::TopologyMismatch, "lambda field and chart belong to different topologies");
    return flatten_vertex_field(chart, lambda.values);
}

void flatten_sketch(const ParamChart& chart, const FaceMesh& mesh, const DisplacementSet& displacements,
                    const CurveParams& params, const Camera& camera, Raster& direction, Raster& magnitude,
                    const SketchFlattenOptions& options)
{
    if (mesh.topology_id() != chart.topology_id)
        throw Error(ErrorCode::TopologyMismatch, "mesh and chart belong to different topologies");
    direction = masked(chart, 2);
    magnitude = masked(chart, 1);
    std::fill(direction.data.begin(), direction.data.end(), kSentinel);
    const double r = chart.resolution;
    const double half = 0.5 * options.ribbon_width_px;
    std::vector<double> best(direction.pixel_count(), std::numeric_limits<double>::infinity());

    for (const auto& [name, disp] : displacements.curves) {
        const auto path = mesh.feature_curves.find(name);
        const auto p = params.find(name);
        if (path == mesh.feature_curves.end() || p == params.end())
            throw Error(ErrorCode::MissingCurve, "no feature curve '" + name + "' for the displacement set");
        if (static_cast<int>(disp.size()) != displacements.stations)
            throw Error(ErrorCode::InvalidArgument, "curve '" + name + "' has " + std::to_string(disp.size()) +
                                                        " displacements for " + std::to_string(displacements.stations) + " stations");
        const auto samples = locate_stations(path->second, p->second, displacements.stations);
        std::vector<Eigen::Vector2d> pos(samples.size());
        for (std::size_t k = 0; k < samples.size(); ++k)
            pos[k] = r * ((1.0 - samples[k].w) * chart.uv.row(samples[k].a) + samples[k].w * chart.uv.row(samples[k].b)).transpose();

        for (std::size_t k = 0; k + 1 < pos.size(); ++k) {
            const Eigen::Vector2d a = pos[k], b = pos[k + 1];
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - half - 1)));
            const int x1 = std::min(chart.resolution - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + half)));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - half - 1)));
            const int y1 = std::min(chart.resolution - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + half)));
            const Eigen::Vector2d ab = b - a;
            const double len2 = ab.squaredNorm();
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t idx = direction.index(x, y);
                    if (!chart.valid(x, y))
                        continue;
                    const Eigen::Vector2d q(x + 0.5, y + 0.5);
                    const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
                    const double d = (a + t * ab - q).norm();
                    if (d > half || d >= best[idx])
                        continue;
                    best[idx] = d;
                    const Eigen::Vector2d v = ((1.0 - t) * disp[k] + t * disp[k + 1]) / camera.scale;
                    const double m = v.norm();
                    magnitude.data[idx] = static_cast<float>(m);
                    direction.data[2 * idx] = m > 0.0 ? encode_direction(v.x() / m) : kSentinel;
                    direction.data[2 * idx + 1] = m > 0.0 ? encode_direction(v.y() / m) : kSentinel;
                }
            }
        }
    }
}

void flatten_laplacians(const ParamChart& chart, const LaplacianSet& laplacians, Raster& direction, Raster& magnitude)
{
    flatten_vector_field(chart, laplacians.deltas, direction, magnitude);
}

void export_map_png(const std::filesystem::path& path, const Raster& raster, bool direction)
{
    Raster vis(raster.width, raster.height, raster.channels == 1 ? 1 : 3);
    if (direction) {
        for (std::size_t i = 0; i < raster.pixel_count(); ++i)
            for (int c = 0; c < std::min(raster.channels, 3); ++c)
                vis.data[i * vis.channels + c] = raster.data[i * raster.channels + c];
    } else {
        for (int c = 0; c < std::min(raster.channels, 3); ++c) {
            float lo = std::numeric_limits<float>::infinity(), hi = -lo;
            for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
                if (raster.has_mask() && !raster.mask[i])
                    continue;
                lo = std::min(lo, raster.data[i * raster.channels + c]);
                hi = std::max(hi, raster.data[i * raster.channels + c]);
            }
            const float span = hi > lo ? hi - lo : 1.0f;
            for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
                const bool ok = !raster.has_mask() || raster.mask[i];
                vis.data[i * vis.channels + c] = ok ? (raster.data[i * raster.channels + c] - lo) / span : 0.0f;
            }
        }
    }
    save_png(path, vis, Transfer::Linear);
}

} // namespace caric
