#pragma once

#include "caric/camera.hpp"
#include "caric/face_mesh.hpp"
#include "caric/raster.hpp"

#include <Eigen/Core>

#include <vector>

namespace caric {

/// Regular triangulated grid over a w x h image. The last row/column sits on
/// the image edge, so cells there may be narrower than `cell`.
struct WarpGrid {
    int width = 0;
    int height = 0;
    double cell = 24.0;
    int cols = 0; // vertices per row
    int rows = 0; // vertex rows
    Eigen::MatrixX2d rest;
    Eigen::MatrixX2d deformed;
    std::vector<char> fixed; // Dirichlet (border) or constrained
    Eigen::MatrixX3i triangles;

    static WarpGrid make(int width, int height, double cell = 24.0);
    int index(int i, int j) const { return j * cols + i; }
    bool on_border(int v) const;
    /// Fixes the border vertices at their rest positions.
    void fix_border();
};

struct WarpOptions {
    double cell = 24.0;
    double bind_radius_cells = 1.0;
    int arap_iterations = 0; // local/global refinement after the similarity solve
};

/// Constrains every free grid vertex within `radius` of one of the points to
/// the rest position plus the mean displacement of those points. Returns the
/// number of constrained vertices.
int bind_constraints(WarpGrid& grid, const std::vector<Eigen::Vector2d>& points,
                     const std::vector<Eigen::Vector2d>& displacements, double radius);

/// Moves the free vertices to minimize the as-similar-as-possible energy
/// (per triangle: distance of the deformed corners to the best similarity
/// image of the rest corners), fixed vertices held. Optional ARAP rounds
/// replace similarities with rotations.
void solve_warp(WarpGrid& grid, int arap_iterations = 0);

/// Sum over triangles of the similarity-fit residual of `grid.deformed`.
double warp_energy(const WarpGrid& grid);

int inverted_triangles(const WarpGrid& grid);

/// Backward mapping through the deformed grid: each output pixel inside a
/// deformed triangle samples the input at the matching rest position
/// (clamped to the image). Pixels no triangle covers keep the input value.
/// A grid smaller than the image covers the window at (x0, y0).
Raster resample_warp(const Raster& image, const WarpGrid& grid, int x0 = 0, int y0 = 0);

struct WarpResult {
    Raster image;
    WarpGrid grid;
    int constrained = 0;
    int inverted = 0;
};

/// Background warp driven by the projected displacements of mesh vertices
/// facing the camera in mesh_src.
WarpResult warp_background(const Raster& image, const FaceMesh& mesh_src, const FaceMesh& mesh_dst,
                           const Camera& camera, const WarpOptions& options = {});

} // namespace caric
