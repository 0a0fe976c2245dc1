#pragma once

#include "caric/camera.hpp"
#include "caric/face_mesh.hpp"
#include "caric/raster.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace caric {

inline constexpr std::uint8_t kNoRegion = 255;

struct RenderOptions {
    bool exclude_eyes_mouth = true;
    bool cull_backfaces = true;
};

/// Render of mesh_dst textured from the photo through mesh_src's projection.
/// Normals are in camera space (the viewer looks along +z).
struct RenderOutput {
    Raster color;          // 3 channels, linear RGB, masked
    Mask mask;             // drawn pixels
    Raster normals_before; // 3 channels: mesh_src normals at the same surface point
    Raster normals_after;  // 3 channels: mesh_dst normals
    Raster stretch;        // 1 channel: screen area after / before of the covering triangle
    Raster depth;          // 1 channel, +inf where nothing is visible
    std::vector<std::uint8_t> region; // Region of the visible triangle, kNoRegion if none
    Mask excluded;         // visible eyes/mouth triangles left undrawn

    int width() const { return color.width; }
    int height() const { return color.height; }
    Mask region_mask(Region r) const;
};

/// Region of a triangle: majority vote of its corners (first corner on ties).
Region triangle_region(const FaceMesh& mesh, int triangle);

RenderOutput render_textured(const FaceMesh& mesh_src, const FaceMesh& mesh_dst, const Camera& camera,
                             const Raster& image, const RenderOptions& options = {});

/// Vertex normals rotated into camera space.
Eigen::MatrixX3d camera_normals(const FaceMesh& mesh, const Camera& camera);

} // namespace caric
