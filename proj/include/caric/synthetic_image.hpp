#pragma once

#include "caric/render.hpp"
#include "caric/sh.hpp"

#include <cstdint>

namespace caric {

/// Multi-octave value noise around a base colour; `feature_px` is the
/// coarsest octave's period. Values are clamped to [0, 1].
Raster procedural_texture(int width, int height, std::uint64_t seed, const Eigen::Vector3d& base,
                          double amplitude = 0.15, double feature_px = 64.0, int octaves = 5);

/// A default soft frontal light (viewer looks along +z, so light from the
/// camera has a negative z component).
SHLighting default_lighting();

struct Portrait {
    Raster image;   // linear RGB
    Raster albedo;  // linear RGB, face pixels only
    Mask face;      // pixels covered by the mesh
    RenderOutput render;
};

/// Lambertian portrait: procedural skin albedo on the mesh, shaded by the SH
/// light in camera space, over a procedural background. Eyes and mouth get
/// darker albedo so they stand out.
Portrait make_portrait(const FaceMesh& mesh, const Camera& camera, const SHLighting& light, std::uint64_t seed);

} // namespace caric
