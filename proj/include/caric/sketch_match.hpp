#pragma once

#include "caric/exaggeration.hpp"
#include "caric/sketch.hpp"

namespace caric {

struct MatchOptions {
    int stations = 64;
    /// Penalty on station constraints relative to the Laplacian prior. Large
    /// enough that attainable targets are met to a small fraction of a pixel.
    double handle_weight = 1e6;
};

struct MatchResult {
    FaceMesh mesh;
    double max_station_error_px = 0.0;
};

/// Handle-based deformation toward an edited sketch. Each feature-curve
/// station is tied to its target in the camera's image plane (camera-frame x
/// and y; depth is left to the Laplacian prior, which keeps the input
/// Laplacians with unit factors and the anchors in place).
///
/// `params` locates stations on the vertex paths; when null, the arc-length
/// parameters of the mesh's own projection are used.
MatchResult match_sketch(const FaceMesh& mesh, const Camera& camera, const SketchSet& edited,
                         const SolverContext& context, const CurveParams* params = nullptr,
                         const MatchOptions& options = {});

/// Largest distance between projected mesh stations and sketch stations.
double max_station_error(const FaceMesh& mesh, const Camera& camera, const SketchSet& sketch,
                         const CurveParams& params, int stations = 64);

} // namespace caric
