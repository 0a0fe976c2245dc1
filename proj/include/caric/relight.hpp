#pragma once

#include "caric/raster.hpp"
#include "caric/render.hpp"
#include "caric/sh.hpp"

#include <limits>
#include <vector>

namespace caric {

struct LightingOptions {
    int alternations = 10;
    double mu_albedo = 0.5;  // albedo smoothness weight per neighbour pair (objective is a per-pixel mean)
    double mu_light = 1e-7;  // L2 prior on the non-DC coefficients; weak, it only pins unobserved modes
    // Region mean of the albedo, which fixes the albedo/light scale. NaN keeps
    // the initial value, the region mean intensity.
    double albedo_mean = std::numeric_limits<double>::quiet_NaN();
    int min_pixels = 100;
};

struct LightingResult {
    SHLighting light;
    Raster albedo;                  // 1 channel, masked to the pixels used
    std::vector<double> objective;  // after each alternation
    int pixels = 0;
};

/// Grey-scale light and albedo on `region` from image intensity and camera
/// space normals (3 channels), alternating a linear solve for the nine
/// coefficients with a screened smoothing solve for the albedo.
LightingResult estimate_lighting(const Raster& gray, const Raster& normals, const Mask& region,
                                 const LightingOptions& options = {});

/// Uses the render's source normals: the composite still carries the shading
/// of the original surface.
LightingResult estimate_lighting(const Raster& gray, const RenderOutput& render, const Mask& region,
                                 const LightingOptions& options = {});

double lighting_objective(const Raster& gray, const Raster& normals, const Mask& region, const Raster& albedo,
                          const SHLighting& light, const LightingOptions& options);

struct AlphaOptions {
    double epsilon = 1e-3;
    double lo = 0.3;
    double hi = 3.0;
    int downsample = 4;
};

/// Per-pixel ratio of the light on the new normals to the light on the old
/// ones, corrected so it is exactly 1 on the edge of `face` and outside it.
Raster raw_alpha(const SHLighting& light, const RenderOutput& render, const Mask& face, double epsilon = 1e-3);
Raster build_alpha(const SHLighting& light, const RenderOutput& render, const Mask& face,
                   const AlphaOptions& options = {});
Raster build_alpha(const SHLighting& light, const RenderOutput& render, const AlphaOptions& options = {});

/// Face pixels with a 4-neighbour outside the face or off the image.
Mask mask_boundary(const Mask& face);

Raster reshade(const Raster& composite, const Raster& alpha);

} // namespace caric
