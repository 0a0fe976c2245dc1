#pragma once

#include "caric/raster.hpp"
#include "caric/render.hpp"
#include "caric/warp.hpp"

#include <Eigen/Core>

#include <vector>

namespace caric {

struct SeamOptions {
    int band = 16; // px, inward from the foreground mask edge
};

/// Foreground/background labelling from a minimum cut inside the band
/// between the foreground mask edge and its erosion.
struct SeamResult {
    Mask labels;      // 1 = take the foreground
    Mask band;        // free pixels of the cut problem plus its two rings
    double cost = 0.0;
    Mask blend_mask;  // pixels solved by the Poisson blend (= labels)
};

/// Per-pixel colour difference |fg - bg| (Euclidean over channels).
Raster color_difference(const Raster& fg, const Raster& bg);

/// Cost of a labelling: sum over 4-neighbour pairs inside the band with
/// different labels of d(p) + d(q).
double seam_cost(const Mask& labels, const Mask& band, const Raster& difference);

/// Band and its terminal rings for a foreground mask: band = mask minus its
/// erosion; the outer ring touches pixels outside the mask (or the image
/// edge), the inner ring touches the eroded interior.
void seam_band(const Mask& fg_mask, int band_width, Mask& band, Mask& inner_ring, Mask& outer_ring);

SeamResult seam_cut(const Raster& fg, const Mask& fg_mask, const Raster& bg, const SeamOptions& options = {});
SeamResult seam_cut(const RenderOutput& fg, const Raster& bg, const SeamOptions& options = {});

struct PoissonOptions {
    bool direct = true;      // sparse LDLT; otherwise conjugate gradients
    double tolerance = 1e-6; // relative residual (CG stop, and the bar either path must meet)
    int max_iterations = 20000;
};

struct PoissonStats {
    int iterations = 0;
    double relative_residual = 0.0;
    std::size_t unknowns = 0;
};

/// Solves lap(u) = lap(guidance) on the region with u = boundary on the
/// pixels just outside it; returns `boundary` with the region replaced.
/// Guidance gradients across the region edge use the guidance values on
/// both sides; the image edge is a natural (Neumann) boundary.
Raster poisson_solve(const Raster& guidance, const Raster& boundary, const Mask& region,
                     const PoissonOptions& options = {}, PoissonStats* stats = nullptr);

Raster poisson_blend(const Raster& fg, const Raster& bg, const SeamResult& seam, const PoissonOptions& options = {},
                     PoissonStats* stats = nullptr);

struct FillOptions {
    double cell = 8.0;
    double margin_cells = 3.0;
    bool blend = true;
};

/// Pastes `source` into `composite` over `target_mask` after warping it so
/// that the source boundary points land on the target boundary points, then
/// Poisson-blends the pasted region. An empty mask is a no-op.
Raster fill_interior(const Raster& composite, const Raster& source, const Mask& target_mask,
                     const std::vector<Eigen::Vector2d>& source_points,
                     const std::vector<Eigen::Vector2d>& target_points, const FillOptions& options = {});

/// Local grid warp of an axis-aligned window: the window border stays put,
/// grid vertices near `points` follow `displacements`, and pixels outside
/// the window are untouched.
Raster warp_window(const Raster& image, int x0, int y0, int width, int height,
                   const std::vector<Eigen::Vector2d>& points, const std::vector<Eigen::Vector2d>& displacements,
                   double cell, double radius);

struct EarEditOptions {
    int stations = 64;
    double cell = 8.0;
    double max_length_ratio = 3.0;
};

/// Deforms the image so that the boundary curve moves onto the redrawn one,
/// within a window twice the size of the curves' bounding box.
Raster ear_edit(const Raster& composite, const std::vector<Eigen::Vector2d>& boundary_curve,
                const std::vector<Eigen::Vector2d>& redrawn, const EarEditOptions& options = {});

} // namespace caric
