#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace caric {

enum class Region : std::uint8_t {
    Other = 0,
    Forehead,
    Chin,
    Nose,
    Cheek,
    Mouth,
    Eyes,
};

inline constexpr int kRegionCount = 7;

std::string_view region_name(Region region);
std::optional<Region> region_from_name(std::string_view name);

/// Name of the feature curve that carries the face outline. It is the only
/// curve required to be closed.
inline constexpr std::string_view kSilhouette = "silhouette";

/// Fixed-topology triangle mesh of a face with its semantic annotations.
///
/// Triangles are wound so that the cross product of (b - a) and (c - a)
/// points out of the surface. Feature curves are ordered vertex paths; a
/// closed curve repeats its first vertex at the end.
struct FaceMesh {
    Eigen::MatrixX3d vertices;
    Eigen::MatrixX3i triangles;
    std::vector<Region> region_labels;
    std::map<std::string, std::vector<int>> feature_curves;
    std::vector<int> anchors;
    /// Optional per-vertex parametric coordinates in [0,1]^2 shared by every
    /// mesh of the topology. Empty when the chart is to be computed.
    Eigen::MatrixX2d chart_uv;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int triangle_count() const { return static_cast<int>(triangles.rows()); }

    /// 64-bit FNV-1a over the triangle index buffer followed by the anchor list.
    std::uint64_t topology_id() const;

    /// Throws Error(InvalidMesh) describing the first violated invariant.
    void validate() const;

    /// Copy of this mesh with replaced vertex positions.
    FaceMesh with_vertices(Eigen::MatrixX3d positions) const;

    bool curve_is_closed(const std::string& name) const;
};

/// Sorted one-ring neighbour lists.
std::vector<std::vector<int>> vertex_neighbors(const FaceMesh& mesh);

/// Area-weighted vertex normals, normalized.
Eigen::MatrixX3d vertex_normals(const FaceMesh& mesh);

double bounding_box_diagonal(const Eigen::MatrixX3d& vertices);

/// Vertex ids whose label equals `region`.
std::vector<int> vertices_in_region(const FaceMesh& mesh, Region region);

/// Boundary loops of a triangle subset, as closed vertex paths (first == last).
/// Only edges used by exactly one selected triangle participate.
std::vector<std::vector<int>> boundary_loops(const FaceMesh& mesh, const std::vector<bool>& triangle_selected);

std::uint64_t fnv1a_64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

} // namespace caric
