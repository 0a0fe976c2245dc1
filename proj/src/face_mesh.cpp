#include "caric/face_mesh.hpp"

#include "caric/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

namespace caric {

namespace {

constexpr std::array<std::string_view, kRegionCount> kRegionNames = {
    "other", "forehead", "chin", "nose", "cheek", "mouth", "eyes",
};

std::uint64_t edge_key(int a, int b)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

} // namespace

std::string_view region_name(Region region)
{
    return kRegionNames[static_cast<std::size_t>(region)];
}

std::optional<Region> region_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kRegionNames.size(); ++i) {
        if (kRegionNames[i] == name)
            return static_cast<Region>(i);
    }
    return std::nullopt;
}

std::uint64_t fnv1a_64(const void* data, std::size_t size, std::uint64_t seed)
{
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = seed;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t FaceMesh::topology_id() const
{
    // Little-endian int32 stream: triangles row by row, then anchors.
    std::vector<std::uint8_t> buffer;
    buffer.reserve(static_cast<std::size_t>(triangles.size() + anchors.size()) * 4);
    auto push = [&buffer](int value) {
        const auto u = static_cast<std::uint32_t>(value);
        for (int k = 0; k < 4; ++k)
            buffer.push_back(static_cast<std::uint8_t>((u >> (8 * k)) & 0xffu));
    };
    for (int t = 0; t < triangles.rows(); ++t)
        for (int k = 0; k < 3; ++k)
            push(triangles(t, k));
    for (int a : anchors)
        push(a);
    return fnv1a_64(buffer.data(), buffer.size());
}

void FaceMesh::validate() const
{
    const int n = vertex_count();
    if (n == 0 || triangle_count() == 0)
        throw Error(ErrorCode::InvalidMesh, "mesh has no vertices or no triangles");
    if (!vertices.allFinite())
        throw Error(ErrorCode::InvalidMesh, "non-finite vertex position");
    if (static_cast<int>(region_labels.size()) != n)
        throw Error(ErrorCode::InvalidMesh, "region_labels must cover every vertex");

    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(static_cast<std::size_t>(triangle_count()) * 3);
    std::vector<int> uses(static_cast<std::size_t>(n), 0);
    for (int t = 0; t < triangle_count(); ++t) {
        const int a = triangles(t, 0), b = triangles(t, 1), c = triangles(t, 2);
        for (int v : {a, b, c}) {
            if (v < 0 || v >= n)
                throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " index out of range");
            ++uses[static_cast<std::size_t>(v)];
        }
        if (a == b || b == c || a == c)
            throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " repeats a vertex");
        for (auto [p, q] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
            if (++directed[edge_key(p, q)] > 1)
                throw Error(ErrorCode::InvalidMesh,
                            "edge " + std::to_string(p) + "-" + std::to_string(q) + " is non-manifold or inconsistently oriented");
        }
    }
    for (int v = 0; v < n; ++v) {
        if (uses[static_cast<std::size_t>(v)] == 0)
            throw Error(ErrorCode::InvalidMesh, "isolated vertex " + std::to_string(v));
    }

    // Connectivity over the vertex graph.
    const auto neighbors = vertex_neighbors(*this);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> queue;
    queue.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop();
        for (int w : neighbors[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++reached;
                queue.push(w);
            }
        }
    }
    if (reached != n)
        throw Error(ErrorCode::InvalidMesh, "mesh is not connected");

    std::set<int> curve_vertices;
    for (const auto& [name, path] : feature_curves) {
        if (path.size() < 2)
            throw Error(ErrorCode::InvalidMesh, "feature curve '" + name + "' has fewer than two vertices");
        for (int v : path) {
            if (v < 0 || v >= n)
                throw Error(ErrorCode::InvalidMesh, "feature curve '" + name + "' references invalid vertex");
            curve_vertices.insert(v);
        }
        if (name == kSilhouette && path.front() != path.back())
            throw Error(ErrorCode::InvalidMesh, "silhouette curve must be closed");
    }

    if (anchors.empty())
        throw Error(ErrorCode::InvalidMesh, "anchor set is empty");
    for (int a : anchors) {
        if (a < 0 || a >= n)
            throw Error(ErrorCode::InvalidMesh, "anchor index out of range");
        if (curve_vertices.count(a))
            throw Error(ErrorCode::InvalidMesh, "anchor " + std::to_string(a) + " lies on a feature curve");
    }

    if (chart_uv.rows() != 0) {
        if (chart_uv.rows() != n)
            throw Error(ErrorCode::InvalidMesh, "chart_uv must have one row per vertex");
        if (!chart_uv.allFinite() || chart_uv.minCoeff() < 0.0 || chart_uv.maxCoeff() > 1.0)
            throw Error(ErrorCode::InvalidMesh, "chart_uv must lie in [0,1]^2");
    }
}

FaceMesh FaceMesh::with_vertices(Eigen::MatrixX3d positions) const
{
    FaceMesh copy = *this;
    copy.vertices = std::move(positions);
    return copy;
}

bool FaceMesh::curve_is_closed(const std::string& name) const
{
    const auto it = feature_curves.find(name);
    return it != feature_curves.end() && it->second.size() > 2 && it->second.front() == it->second.back();
}

std::vector<std::vector<int>> vertex_neighbors(const FaceMesh& mesh)
{
    std::vector<std::vector<int>> rings(static_cast<std::size_t>(mesh.vertex_count()));
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles(t, k);
            const int b = mesh.triangles(t, (k + 1) % 3);
            rings[static_cast<std::size_t>(a)].push_back(b);
            rings[static_cast<std::size_t>(b)].push_back(a);
        }
    }
    for (auto& ring : rings) {
        std::sort(ring.begin(), ring.end());
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    }
    return rings;
}

Eigen::MatrixX3d vertex_normals(const FaceMesh& mesh)
{
    Eigen::MatrixX3d normals = Eigen::MatrixX3d::Zero(mesh.vertex_count(), 3);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const int a = mesh.triangles(t, 0), b = mesh.triangles(t, 1), c = mesh.triangles(t, 2);
        const Eigen::Vector3d pa = mesh.vertices.row(a);
        const Eigen::Vector3d pb = mesh.vertices.row(b);
        const Eigen::Vector3d pc = mesh.vertices.row(c);
        // Unnormalized cross product carries twice the triangle area.
        const Eigen::RowVector3d weighted = (pb - pa).cross(pc - pa).transpose();
        normals.row(a) += weighted;
        normals.row(b) += weighted;
        normals.row(c) += weighted;
    }
    for (int v = 0; v < normals.rows(); ++v) {
        const double len = normals.row(v).norm();
        if (!(len > 0.0))
            throw Error(ErrorCode::InvalidMesh, "zero-area one-ring at vertex " + std::to_string(v));
        normals.row(v) /= len;
    }
    return normals;
}

double bounding_box_diagonal(const Eigen::MatrixX3d& vertices)
{
    if (vertices.rows() == 0)
        return 0.0;
    return (vertices.colwise().maxCoeff() - vertices.colwise().minCoeff()).norm();
}

std::vector<int> vertices_in_region(const FaceMesh& mesh, Region region)
{
    std::vector<int> out;
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.region_labels[static_cast<std::size_t>(v)] == region)
            out.push_back(v);
    return out;
}

std::vector<std::vector<int>> boundary_loops(const FaceMesh& mesh, const std::vector<bool>& triangle_selected)
{
    std::set<std::uint64_t> half_edges;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        if (!triangle_selected[static_cast<std::size_t>(t)])
            continue;
        for (int k = 0; k < 3; ++k)
            half_edges.insert(edge_key(mesh.triangles(t, k), mesh.triangles(t, (k + 1) % 3)));
    }
    std::multimap<int, int> next;
    for (std::uint64_t key : half_edges) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        if (!half_edges.count(edge_key(b, a)))
            next.emplace(a, b);
    }

    std::vector<std::vector<int>> loops;
    while (!next.empty()) {
        auto it = next.begin();
        const int start = it->first;
        std::vector<int> loop{start};
        int current = start;
        while (true) {
            auto step = next.find(current);
            if (step == next.end())
                break;
            const int to = step->second;
            next.erase(step);
            loop.push_back(to);
            current = to;
            if (to == start)
                break;
        }
        if (loop.size() > 2 && loop.front() == loop.back())
            loops.push_back(std::move(loop));
    }
    return loops;
}

} // namespace caric
