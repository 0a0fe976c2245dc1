#include "caric/render.hpp"

#include "caric/error.hpp"
#include "caric/image_ops.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace caric {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

Eigen::MatrixX2d project_all(const FaceMesh& mesh, const Camera& camera)
{
    Eigen::MatrixX2d p(mesh.vertex_count(), 2);
    for (int v = 0; v < mesh.vertex_count(); ++v)
        p.row(v) = camera.project(mesh.vertices.row(v).transpose()).transpose();
    return p;
}

} // namespace

Mask RenderOutput::region_mask(Region r) const
{
    Mask m(width(), height());
    for (std::size_t i = 0; i < region.size(); ++i)
        m.data[i] = region[i] == static_cast<std::uint8_t>(r) ? 1 : 0;
    return m;
}

Region triangle_region(const FaceMesh& mesh, int triangle)
{
    const Region a = mesh.region_labels[static_cast<std::size_t>(mesh.triangles(triangle, 0))];
    const Region b = mesh.region_labels[static_cast<std::size_t>(mesh.triangles(triangle, 1))];
    const Region c = mesh.region_labels[static_cast<std::size_t>(mesh.triangles(triangle, 2))];
    if (b == c && a != b)
        return b;
    return a;
}

Eigen::MatrixX3d camera_normals(const FaceMesh& mesh, const Camera& camera)
{
    return vertex_normals(mesh) * camera.rotation.transpose();
}

RenderOutput render_textured(const FaceMesh& mesh_src, const FaceMesh& mesh_dst, const Camera& camera,
                             const Raster& image, const RenderOptions& options)
{
    if (mesh_src.topology_id() != mesh_dst.topology_id())
        throw Error(ErrorCode::TopologyMismatch, "source and target meshes must share one topology");
    if (image.channels != 3 || image.empty())
        throw Error(ErrorCode::InvalidArgument, "render needs a non-empty RGB image");
    camera.validate();
    for (int v = 0; v < mesh_dst.vertex_count(); ++v)
        if (camera.depth(mesh_dst.vertices.row(v).transpose()) <= 0.0)
            throw Error(ErrorCode::CameraBehindMesh, "vertex " + std::to_string(v) + " lies behind the camera");

    const int w = image.width, h = image.height;
    const Eigen::MatrixX2d ps = project_all(mesh_src, camera);
    const Eigen::MatrixX2d pd = project_all(mesh_dst, camera);
    Eigen::VectorXd depth(mesh_dst.vertex_count());
    for (int v = 0; v < mesh_dst.vertex_count(); ++v)
        depth[v] = camera.depth(mesh_dst.vertices.row(v).transpose());

    const std::size_t npx = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<float> zbuf(npx, std::numeric_limits<float>::infinity());
    std::vector<int> tri(npx, -1);
    std::vector<Eigen::Vector3f> bary(npx);

    for (int t = 0; t < mesh_dst.triangle_count(); ++t) {
        const int i0 = mesh_dst.triangles(t, 0), i1 = mesh_dst.triangles(t, 1), i2 = mesh_dst.triangles(t, 2);
        const Eigen::Vector2d a = pd.row(i0), b = pd.row(i1), c = pd.row(i2);
        const double area2 = cross2(b - a, c - a);
        // Outward-wound triangles facing the viewer appear clockwise in
        // y-down image coordinates.
        if (std::abs(area2) < 1e-12 || (options.cull_backfaces && area2 > 0.0))
            continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        const double eps = 1e-9;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double w0 = cross2(c - b, p - b) / area2;
                const double w1 = cross2(a - c, p - c) / area2;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < -eps || w1 < -eps || w2 < -eps)
                    continue;
                const double z = w0 * depth[i0] + w1 * depth[i1] + w2 * depth[i2];
                const std::size_t k = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
                if (z < zbuf[k]) {
                    zbuf[k] = static_cast<float>(z);
                    tri[k] = t;
                    bary[k] = Eigen::Vector3f(static_cast<float>(w0), static_cast<float>(w1), static_cast<float>(w2));
                }
            }
        }
    }

    std::vector<double> stretch(static_cast<std::size_t>(mesh_dst.triangle_count()));
    for (int t = 0; t < mesh_dst.triangle_count(); ++t) {
        const int i0 = mesh_dst.triangles(t, 0), i1 = mesh_dst.triangles(t, 1), i2 = mesh_dst.triangles(t, 2);
        const double after = std::abs(cross2(pd.row(i1) - pd.row(i0), pd.row(i2) - pd.row(i0)));
        const double before = std::abs(cross2(ps.row(i1) - ps.row(i0), ps.row(i2) - ps.row(i0)));
        stretch[static_cast<std::size_t>(t)] = after / std::max(before, 1e-9);
    }

    const Eigen::MatrixX3d ns = camera_normals(mesh_src, camera);
    const Eigen::MatrixX3d nd = camera_normals(mesh_dst, camera);

    RenderOutput out;
    out.color = Raster(w, h, 3);
    out.normals_before = Raster(w, h, 3);
    out.normals_after = Raster(w, h, 3);
    out.stretch = Raster(w, h, 1);
    out.depth = Raster(w, h, 1, std::numeric_limits<float>::infinity());
    out.mask = Mask(w, h);
    out.excluded = Mask(w, h);
    out.region.assign(npx, kNoRegion);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
            const int t = tri[k];
            if (t < 0)
                continue;
            const Region region = triangle_region(mesh_dst, t);
            out.region[k] = static_cast<std::uint8_t>(region);
            if (options.exclude_eyes_mouth && (region == Region::Eyes || region == Region::Mouth)) {
                out.excluded.data[k] = 1;
                continue;
            }
            const Eigen::Vector3d wb = bary[k].cast<double>();
            const int i[3] = {mesh_dst.triangles(t, 0), mesh_dst.triangles(t, 1), mesh_dst.triangles(t, 2)};
            Eigen::Vector2d uv = Eigen::Vector2d::Zero();
            Eigen::Vector3d n0 = Eigen::Vector3d::Zero(), n1 = Eigen::Vector3d::Zero();
            for (int j = 0; j < 3; ++j) {
                uv += wb[j] * ps.row(i[j]).transpose();
                n0 += wb[j] * ns.row(i[j]).transpose();
                n1 += wb[j] * nd.row(i[j]).transpose();
            }
            sample_bilinear(image, uv.x(), uv.y(), &out.color.data[k * 3]);
            n0.normalize();
            n1.normalize();
            for (int c = 0; c < 3; ++c) {
                out.normals_before.data[k * 3 + static_cast<std::size_t>(c)] = static_cast<float>(n0[c]);
                out.normals_after.data[k * 3 + static_cast<std::size_t>(c)] = static_cast<float>(n1[c]);
            }
            out.stretch.data[k] = static_cast<float>(stretch[static_cast<std::size_t>(t)]);
            out.depth.data[k] = zbuf[k];
            out.mask.data[k] = 1;
        }
    }
    out.color.mask = out.mask.data;
    return out;
}

} // namespace caric
