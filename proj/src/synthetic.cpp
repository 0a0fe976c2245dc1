#include "caric/synthetic.hpp"

#include "caric/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace caric {

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr double kSilhouetteLongitudeDeg = 80.0;

double gauss2(double x, double y) { return std::exp(-(x * x + y * y)); }

double smoothstep(double e0, double e1, double x)
{
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct Bump {
    double fu, fv, su, sv, amplitude;
};

double relief(const FaceShapeParams& p, const std::vector<Bump>& bumps, double fu, double fv)
{
    const double afu = std::abs(fu);
    double d = 0.0;
    // Nose ridge rising from the bridge to the tip.
    const double along = std::clamp((fv + 0.35) / 0.63, 0.0, 1.0);
    const double tail = fv < 0.28 ? 1.0 : std::exp(-std::pow((fv - 0.28) / 0.05, 2));
    const double width = 0.09 + 0.07 * along;
    d += p.nose * std::exp(-std::pow(fu / width, 2)) * std::pow(along, 1.5) * tail;
    d += p.brow * std::exp(-std::pow((fv + 0.33) / 0.07, 2)) * std::exp(-std::pow(fu / 0.6, 4));
    d -= p.eye_socket * gauss2((afu - 0.33) / 0.15, (fv + 0.17) / 0.09);
    d += p.cheek * gauss2((afu - 0.5) / 0.2, (fv - 0.05) / 0.15);
    d += p.lips * gauss2(fu / 0.25, (fv - 0.52) / 0.05);
    d += p.chin * gauss2(fu / 0.3, (fv - 0.8) / 0.12);
    for (const Bump& b : bumps)
        d += b.amplitude * gauss2((fu - b.fu) / b.su, (fv - b.fv) / b.sv);
    return d;
}

Eigen::Vector3d expression_offset(const FaceExpression& e, double fu, double fv)
{
    Eigen::Vector3d off = Eigen::Vector3d::Zero();
    const double afu = std::abs(fu);
    if (e.smile != 0.0) {
        const double g = std::exp(-std::pow((fv - 0.52) / 0.12, 2)) * std::exp(-std::pow((afu - 0.25) / 0.2, 2));
        off.y() -= e.smile * 0.08 * g;
        off.x() += e.smile * 0.04 * (fu >= 0.0 ? 1.0 : -1.0) * g;
    }
    if (e.jaw_open != 0.0)
        off.y() += e.jaw_open * 0.25 * smoothstep(0.5, 0.6, fv) * std::exp(-std::pow(fu / 0.7, 2));
    if (e.brow_raise != 0.0)
        off.y() -= e.brow_raise * 0.06 * std::exp(-std::pow((fv + 0.33) / 0.12, 2)) * std::exp(-std::pow(fu / 0.7, 2));
    return off;
}

Region classify(double fu, double fv)
{
    const double afu = std::abs(fu);
    if (std::pow((afu - 0.33) / 0.17, 2) + std::pow((fv + 0.17) / 0.08, 2) <= 1.0)
        return Region::Eyes;
    if (std::pow(fu / 0.28, 2) + std::pow((fv - 0.52) / 0.07, 2) <= 1.0)
        return Region::Mouth;
    if (afu <= 0.14 && fv >= -0.3 && fv <= 0.34)
        return Region::Nose;
    if (fv >= -0.85 && fv < -0.3 && afu <= 0.75)
        return Region::Forehead;
    if (afu >= 0.2 && afu <= 0.8 && fv >= -0.05 && fv <= 0.45)
        return Region::Cheek;
    if (fv > 0.62 && fv <= 0.95 && afu <= 0.5)
        return Region::Chin;
    return Region::Other;
}

void orient_outward(FaceMesh& mesh)
{
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const Eigen::Vector3d a = mesh.vertices.row(mesh.triangles(t, 0));
        const Eigen::Vector3d b = mesh.vertices.row(mesh.triangles(t, 1));
        const Eigen::Vector3d c = mesh.vertices.row(mesh.triangles(t, 2));
        if ((b - a).cross(c - a).dot(a + b + c) < 0.0)
            std::swap(mesh.triangles(t, 1), mesh.triangles(t, 2));
    }
}

FaceMesh finish_sphere(std::vector<Eigen::Vector3d> points, const std::vector<Eigen::Vector3i>& tris)
{
    FaceMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i)
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    mesh.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t i = 0; i < tris.size(); ++i)
        mesh.triangles.row(static_cast<Eigen::Index>(i)) = tris[i].transpose();
    orient_outward(mesh);
    mesh.region_labels.assign(points.size(), Region::Other);
    mesh.anchors = axis_anchors(mesh.vertices);
    return mesh;
}

} // namespace

std::vector<Eigen::Vector2d> face_coordinates(const FaceShapeParams& p)
{
    std::vector<Eigen::Vector2d> coords;
    coords.reserve(static_cast<std::size_t>(p.rows * p.cols));
    for (int i = 0; i < p.rows; ++i) {
        for (int j = 0; j < p.cols; ++j) {
            const double phi_deg = (static_cast<double>(j) / (p.cols - 1) - 0.5) * 2.0 * p.longitude_extent_deg;
            const double fv = (static_cast<double>(i) / (p.rows - 1) - 0.5) * 2.0;
            coords.emplace_back(phi_deg / kSilhouetteLongitudeDeg, fv);
        }
    }
    return coords;
}

FaceMesh make_face_mesh(const FaceShapeParams& p, const FaceExpression& expression)
{
    if (p.rows < 24 || p.cols < 24)
        throw Error(ErrorCode::InvalidArgument, "face grid needs at least 24x24 vertices");

    std::vector<Bump> bumps;
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < p.identity_bumps; ++k) {
        bumps.push_back({unit(rng) * 1.6 - 0.8, unit(rng) * 1.6 - 0.8, 0.15 + 0.25 * unit(rng),
                         0.15 + 0.25 * unit(rng), p.identity_amplitude * (2.0 * unit(rng) - 1.0)});
    }

    const auto coords = face_coordinates(p);
    const int n = p.rows * p.cols;
    FaceMesh mesh;
    mesh.vertices.resize(n, 3);
    mesh.region_labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < p.rows; ++i) {
        for (int j = 0; j < p.cols; ++j) {
            const int v = i * p.cols + j;
            const double fu = coords[static_cast<std::size_t>(v)].x();
            const double fv = coords[static_cast<std::size_t>(v)].y();
            const double phi = fu * kSilhouetteLongitudeDeg * kDeg;
            const double theta = fv * p.latitude_extent_deg * kDeg;
            const Eigen::Vector3d base(p.half_width * std::sin(phi) * std::cos(theta), p.half_height * std::sin(theta),
                                       -p.half_depth * std::cos(phi) * std::cos(theta));
            const Eigen::Vector3d normal =
                Eigen::Vector3d(base.x() / (p.half_width * p.half_width), base.y() / (p.half_height * p.half_height),
                                base.z() / (p.half_depth * p.half_depth))
                    .normalized();
            const Eigen::Vector3d pos = base + relief(p, bumps, fu, fv) * normal + expression_offset(expression, fu, fv);
            mesh.vertices.row(v) = pos.transpose();
            mesh.region_labels[static_cast<std::size_t>(v)] = classify(fu, fv);
        }
    }

    // The grid itself is a valid chart: regular, non-overlapping and shared
    // by every face built with the same grid size.
    mesh.chart_uv.resize(n, 2);
    for (int i = 0; i < p.rows; ++i) {
        for (int j = 0; j < p.cols; ++j) {
            mesh.chart_uv(i * p.cols + j, 0) = 0.02 + 0.96 * j / (p.cols - 1);
            mesh.chart_uv(i * p.cols + j, 1) = 0.02 + 0.96 * i / (p.rows - 1);
        }
    }

    mesh.triangles.resize(2 * (p.rows - 1) * (p.cols - 1), 3);
    int t = 0;
    for (int i = 0; i + 1 < p.rows; ++i) {
        for (int j = 0; j + 1 < p.cols; ++j) {
            const int v00 = i * p.cols + j, v01 = v00 + 1, v10 = v00 + p.cols, v11 = v10 + 1;
            mesh.triangles.row(t++) = Eigen::RowVector3i(v00, v10, v01);
            mesh.triangles.row(t++) = Eigen::RowVector3i(v01, v10, v11);
        }
    }

    auto row_of = [&](double fv) {
        return std::clamp(static_cast<int>(std::lround((fv + 1.0) / 2.0 * (p.rows - 1))), 0, p.rows - 1);
    };
    auto col_of = [&](double fu) {
        const double phi_deg = fu * kSilhouetteLongitudeDeg;
        return std::clamp(static_cast<int>(std::lround((phi_deg / (2.0 * p.longitude_extent_deg) + 0.5) * (p.cols - 1))), 0,
                          p.cols - 1);
    };
    auto row_path = [&](int row, int c0, int c1) {
        std::vector<int> path;
        const int step = c0 <= c1 ? 1 : -1;
        for (int c = c0;; c += step) {
            path.push_back(row * p.cols + c);
            if (c == c1)
                break;
        }
        return path;
    };
    auto col_path = [&](int col, int r0, int r1) {
        std::vector<int> path;
        const int step = r0 <= r1 ? 1 : -1;
        for (int r = r0;; r += step) {
            path.push_back(r * p.cols + col);
            if (r == r1)
                break;
        }
        return path;
    };

    {
        const int top = row_of(-0.9), bottom = row_of(0.93), left = col_of(-0.95), right = col_of(0.95);
        std::vector<int> loop = row_path(top, left, right);
        auto append = [&loop](const std::vector<int>& part) { loop.insert(loop.end(), part.begin() + 1, part.end()); };
        append(col_path(right, top, bottom));
        append(row_path(bottom, right, left));
        append(col_path(left, bottom, top));
        mesh.feature_curves[std::string(kSilhouette)] = loop;
    }
    mesh.feature_curves["left_eyebrow"] = row_path(row_of(-0.33), col_of(-0.6), col_of(-0.12));
    mesh.feature_curves["right_eyebrow"] = row_path(row_of(-0.33), col_of(0.12), col_of(0.6));
    mesh.feature_curves["left_eye"] = row_path(row_of(-0.17), col_of(-0.48), col_of(-0.18));
    mesh.feature_curves["right_eye"] = row_path(row_of(-0.17), col_of(0.18), col_of(0.48));
    mesh.feature_curves["nose"] = col_path(col_of(0.0), row_of(-0.25), row_of(0.3));
    mesh.feature_curves["mouth"] = row_path(row_of(0.52), col_of(-0.26), col_of(0.26));
    mesh.feature_curves["left_ear"] = col_path(col_of(-1.05), row_of(-0.2), row_of(0.25));
    mesh.feature_curves["right_ear"] = col_path(col_of(1.05), row_of(-0.2), row_of(0.25));

    const double anchor_fu = p.anchor_longitude_deg / kSilhouetteLongitudeDeg;
    for (int i = 0; i < p.rows; i += p.anchor_stride) {
        for (int j = 0; j < p.cols; j += p.anchor_stride) {
            const int v = i * p.cols + j;
            if (std::abs(coords[static_cast<std::size_t>(v)].x()) >= anchor_fu)
                mesh.anchors.push_back(v);
        }
    }
    if (mesh.anchors.empty())
        throw Error(ErrorCode::InvalidArgument, "face patch does not reach the anchor longitude");
    return mesh;
}

FaceShapeParams random_face_params(std::uint64_t seed, int rows, int cols)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    FaceShapeParams p;
    p.rows = rows;
    p.cols = cols;
    p.seed = seed;
    p.half_width *= 1.0 + 0.1 * jitter(rng);
    p.half_height *= 1.0 + 0.1 * jitter(rng);
    p.half_depth *= 1.0 + 0.1 * jitter(rng);
    p.nose *= 1.0 + 0.3 * jitter(rng);
    p.brow *= 1.0 + 0.3 * jitter(rng);
    p.eye_socket *= 1.0 + 0.3 * jitter(rng);
    p.cheek *= 1.0 + 0.3 * jitter(rng);
    p.lips *= 1.0 + 0.3 * jitter(rng);
    p.chin *= 1.0 + 0.3 * jitter(rng);
    p.identity_bumps = 4;
    return p;
}

std::vector<int> axis_anchors(const Eigen::MatrixX3d& vertices)
{
    std::vector<int> anchors;
    for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
            Eigen::Index best = 0;
            (vertices.col(axis) * sign).maxCoeff(&best);
            anchors.push_back(static_cast<int>(best));
        }
    }
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    return anchors;
}

FaceMesh make_uv_sphere(int rings, int segments, double radius)
{
    if (rings < 1 || segments < 3)
        throw Error(ErrorCode::InvalidArgument, "uv sphere needs >= 1 ring and >= 3 segments");
    std::vector<Eigen::Vector3d> pts;
    pts.emplace_back(0.0, radius, 0.0);
    for (int r = 0; r < rings; ++r) {
        const double theta = M_PI * (r + 1) / (rings + 1);
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * M_PI * s / segments;
            pts.emplace_back(radius * std::sin(theta) * std::cos(phi), radius * std::cos(theta),
                             radius * std::sin(theta) * std::sin(phi));
        }
    }
    pts.emplace_back(0.0, -radius, 0.0);
    const int south = static_cast<int>(pts.size()) - 1;
    auto ring_vertex = [segments](int r, int s) { return 1 + r * segments + (s % segments); };
    std::vector<Eigen::Vector3i> tris;
    for (int s = 0; s < segments; ++s)
        tris.emplace_back(0, ring_vertex(0, s), ring_vertex(0, s + 1));
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            tris.emplace_back(ring_vertex(r, s), ring_vertex(r + 1, s), ring_vertex(r, s + 1));
            tris.emplace_back(ring_vertex(r, s + 1), ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1));
        }
    }
    for (int s = 0; s < segments; ++s)
        tris.emplace_back(south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s));
    return finish_sphere(std::move(pts), tris);
}

FaceMesh make_icosphere(int subdivisions, double radius)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> pts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : pts)
        p.normalize();
    std::vector<Eigen::Vector3i> tris = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end())
                return it->second;
            pts.push_back((pts[static_cast<std::size_t>(a)] + pts[static_cast<std::size_t>(b)]).normalized());
            const int id = static_cast<int>(pts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Eigen::Vector3i> next;
        next.reserve(tris.size() * 4);
        for (const auto& f : tris) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.emplace_back(f[0], ab, ca);
            next.emplace_back(f[1], bc, ab);
            next.emplace_back(f[2], ca, bc);
            next.emplace_back(ab, bc, ca);
        }
        tris = std::move(next);
    }
    for (auto& p : pts)
        p *= radius;
    return finish_sphere(std::move(pts), tris);
}

FaceMesh make_sphere_cap(int rings, int segments, double max_polar_deg, double radius)
{
    std::vector<Eigen::Vector3d> pts;
    pts.emplace_back(0.0, 0.0, -radius);
    for (int r = 1; r <= rings; ++r) {
        const double alpha = max_polar_deg * kDeg * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * M_PI * s / segments;
            pts.emplace_back(radius * std::sin(alpha) * std::cos(phi), radius * std::sin(alpha) * std::sin(phi),
                             -radius * std::cos(alpha));
        }
    }
    auto ring_vertex = [segments](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
    std::vector<Eigen::Vector3i> tris;
    for (int s = 0; s < segments; ++s)
        tris.emplace_back(0, ring_vertex(1, s), ring_vertex(1, s + 1));
    for (int r = 1; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            tris.emplace_back(ring_vertex(r, s), ring_vertex(r + 1, s), ring_vertex(r, s + 1));
            tris.emplace_back(ring_vertex(r, s + 1), ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1));
        }
    }
    FaceMesh mesh = finish_sphere(std::move(pts), tris);
    mesh.anchors.clear();
    for (int s = 0; s < segments; s += 2)
        mesh.anchors.push_back(ring_vertex(rings, s));
    return mesh;
}

Camera fit_frontal_camera(const FaceMesh& mesh, int width, int height, double fill)
{
    Eigen::MatrixX2d pts;
    const auto it = mesh.feature_curves.find(std::string(kSilhouette));
    if (it != mesh.feature_curves.end()) {
        pts.resize(static_cast<Eigen::Index>(it->second.size()), 2);
        for (std::size_t k = 0; k < it->second.size(); ++k)
            pts.row(static_cast<Eigen::Index>(k)) = mesh.vertices.row(it->second[k]).head<2>();
    } else {
        pts = mesh.vertices.leftCols<2>();
    }
    const Eigen::RowVector2d lo = pts.colwise().minCoeff();
    const Eigen::RowVector2d hi = pts.colwise().maxCoeff();
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.scale = fill * height / std::max(hi.y() - lo.y(), 1e-9);
    const Eigen::Vector2d center = 0.5 * (lo + hi).transpose();
    cam.translation = Eigen::Vector2d(0.5 * width, 0.5 * height) - cam.scale * center;
    cam.depth_offset = 10.0 * bounding_box_diagonal(mesh.vertices) + mesh.vertices.col(2).cwiseAbs().maxCoeff();
    return cam;
}

} // namespace caric
