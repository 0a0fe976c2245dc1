#pragma once

#include "caric/camera.hpp"
#include "caric/face_mesh.hpp"
#include "caric/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace caric {

struct PatchPlan {
    int width = 0;
    int height = 0;
    int patch = 256;
    int stride = 192;
    std::vector<std::pair<int, int>> origins; // top-left corners
};

/// Grid of patch origins at `stride` (the last row/column shifted inward so
/// patches stay inside the image), keeping the patches that touch the mask.
/// Images smaller than a patch are planned as if padded to patch size.
PatchPlan plan_patches(const Mask& mask, int patch = 256, int stride = 192);

/// Residual predictor: (RGB patch, 1-channel stretch patch) -> signed RGB
/// residual of the same size.
using ResidualEnhancer = std::function<Raster(const Raster& patch, const Raster& stretch)>;
/// Colour predictor: returns the enhanced patch itself.
using ColorEnhancer = std::function<Raster(const Raster& patch, const Raster& stretch)>;

struct EnhanceOptions {
    double max_mean = 0.02; // per-channel residual mean bound
    int workers = 0;        // 0 = hardware concurrency
};

/// Feathering weight of a patch pixel before normalization: a ramp over
/// the overlap width towards each patch edge, never zero inside the patch.
double feather_weight(int i, int j, int patch, int overlap);

/// Enhances every planned patch, averages the residuals with normalized
/// feathering weights and adds the result (clipped to [0, 1]). Pixels with a
/// zero merged residual keep their input values bit for bit.
Raster enhance(const Raster& image, const Raster& stretch, const PatchPlan& plan, const ResidualEnhancer& enhancer,
               const EnhanceOptions& options = {}, Raster* merged_residual = nullptr);

/// Direct colour prediction per patch, tiled without blending: each pixel
/// takes the patch whose centre is nearest.
Raster enhance_direct(const Raster& image, const Raster& stretch, const PatchPlan& plan, const ColorEnhancer& enhancer);

/// Stand-in for the learned enhancer: gain * (patch - blur(patch, sigma))
/// with sigma = sigma_scale * sqrt(stretch), faded in linearly over
/// stretch in [1, 2] and zero where stretch <= 1.
Raster baseline_enhancer(const Raster& patch, const Raster& stretch, double gain = 0.8, double sigma_scale = 0.8);

/// Colour-regressing stand-in for the failure case: sharpened colours with
/// a contrast and tone normalization computed from each patch's own
/// statistics, the way a colour regressor's low-frequency errors depend on
/// its input window.
Raster direct_color_enhancer(const Raster& patch, const Raster& stretch);

/// Vertical and horizontal lines where patch contributions change: patch
/// edges and the midlines used by tiling. Values are the index of the first
/// pixel after the line.
struct PatchBoundaries {
    std::vector<int> columns;
    std::vector<int> rows;
};
PatchBoundaries patch_boundaries(const PatchPlan& plan);

struct SeamMetric {
    double max_jump = 0.0;     // largest gradient jump of (output - reference) across a boundary line
    double gradient_p95 = 0.0; // 95th percentile of |gradient| of the output away from boundaries
    double ratio() const { return gradient_p95 > 0.0 ? max_jump / gradient_p95 : 0.0; }
    bool passes(double tolerance = 0.05) const { return max_jump <= tolerance * gradient_p95; }
};

/// Compares a patch-wise result with the same enhancer run on the whole
/// image in one piece, over pixels of `region`.
SeamMetric seam_metric(const Raster& output, const Raster& reference, const PatchPlan& plan, const Mask& region);

/// Residual enhancer applied to the whole image as one patch.
Raster enhance_whole(const Raster& image, const Raster& stretch, const ResidualEnhancer& enhancer);

struct PairConfig {
    int levels = 10;
    int crops = 10;
    int crop = 256;
    std::uint64_t seed = 1;
    double scale_min = 1.2; // style kernel scales
    double scale_max = 3.0;
    // Level k of n multiplies the style by 1 + (k/n)(global_max - 1): local
    // styles alone barely change the screen area.
    double global_max = 2.5;
};

struct TrainingPair {
    int level = 0;
    double stretch = 1.0;  // mean screen-area ratio over the face
    Raster blurred;        // I_b: render from the downsampled texture
    Raster sharp;          // I_s: render from the full texture
    Mask mask;
    std::vector<std::pair<int, int>> crops; // crop origins
};

std::size_t training_pair_count(std::size_t photos, int levels);

/// One pair for a given exaggerated mesh; `stretch` out is the mean area ratio.
TrainingPair make_pair(const Raster& image, const FaceMesh& mesh, const FaceMesh& exaggerated, const Camera& camera);

/// Per level: exaggerate (clamped to the default lambda bounds), measure the mean stretch, render from a texture
/// downsampled by its square root and from the full texture, and pick random
/// crops inside the face. Levels with mean stretch below 1 are skipped.
std::vector<TrainingPair> make_training_pairs(const Raster& image, const FaceMesh& mesh, const Camera& camera,
                                              const PairConfig& config = {});

/// Writes pairs/level_k/img_####_{b,s}.png, crops/level_k/img_####_c##_{b,s}.png
/// and a pairs.json manifest. Returns the number of pairs written.
std::size_t write_training_pairs(const std::filesystem::path& out_dir, int photo_index,
                                 const std::vector<TrainingPair>& pairs, int crop_size);

} // namespace caric
