#pragma once

#include "caric/camera.hpp"
#include "caric/exaggeration.hpp"
#include "caric/face_mesh.hpp"
#include "caric/raster.hpp"
#include "caric/sketch.hpp"

#include <filesystem>
#include <memory>

namespace caric {

/// Common 2D domain for one mesh topology. Pixel (x, y) covers
/// uv in [x/R, (x+1)/R] x [y/R, (y+1)/R]; each covered pixel centre remembers
/// the chart triangle containing it and its barycentric coordinates.
struct ParamChart {
    int resolution = 256;
    std::uint64_t topology_id = 0;
    Eigen::MatrixX2d uv;
    std::vector<int> pixel_triangle; // -1 outside the chart
    std::vector<Eigen::Vector3f> pixel_bary;
    Eigen::MatrixX3i triangles;

    bool valid(int x, int y) const { return pixel_triangle[static_cast<std::size_t>(y * resolution + x)] >= 0; }
    Mask mask() const;
    std::size_t valid_count() const;

    /// Uses mesh.chart_uv when present, otherwise a Tutte embedding of the
    /// (disk-topology) mesh with its boundary on a circle.
    static ParamChart build(const FaceMesh& mesh, int resolution = 256);
    static ParamChart build(const FaceMesh& mesh, const Eigen::MatrixX2d& uv, int resolution);
};

/// Uniform-weight Tutte embedding into [0,1]^2 (boundary loop on a circle of
/// radius 0.48 about the centre). Throws InvalidMesh unless the mesh has
/// exactly one boundary loop.
Eigen::MatrixX2d tutte_embedding(const FaceMesh& mesh);

/// The four predictor inputs and the lambda map.
struct FlattenedMaps {
    Raster laplacian_direction;    // L_d, 3 channels
    Raster laplacian_magnitude;    // L_m, 1 channel
    Raster sketch_direction;       // S_d, 2 channels
    Raster sketch_magnitude;       // S_m, 1 channel

    std::map<std::string, Raster> as_bundle() const;
    static FlattenedMaps from_bundle(const std::map<std::string, Raster>& bundle);
};

/// Direction encoding c = (n + 1) / 2 and its inverse.
float encode_direction(double component);
double decode_direction(float channel);

/// Barycentric interpolation of a per-vertex field (any column count).
/// Pixels outside the chart hold 0 and are cleared in the raster mask.
Raster flatten_vertex_field(const ParamChart& chart, const Eigen::MatrixXd& field);

/// Splits a per-vertex vector field into direction and magnitude rasters.
/// Zero vectors get the sentinel direction 0.5 in every channel.
void flatten_vector_field(const ParamChart& chart, const Eigen::MatrixXd& field, Raster& direction, Raster& magnitude);

/// Bilinear sample at every vertex uv, ignoring pixels outside the chart.
Eigen::MatrixXd sample_field(const ParamChart& chart, const Raster& raster);

LambdaField lambda_from_map(const ParamChart& chart, const Raster& map, const LambdaBounds& bounds = {});
Raster lambda_to_map(const ParamChart& chart, const LambdaField& lambda);

struct SketchFlattenOptions {
    double ribbon_width_px = 5.0;
};

/// Station displacements (px) divided by the camera scale, drawn as ribbons
/// along the uv image of each curve's stations.
void flatten_sketch(const ParamChart& chart, const FaceMesh& mesh, const DisplacementSet& displacements,
                    const CurveParams& params, const Camera& camera, Raster& direction, Raster& magnitude,
                    const SketchFlattenOptions& options = {});

void flatten_laplacians(const ParamChart& chart, const LaplacianSet& laplacians, Raster& direction, Raster& magnitude);

/// 8-bit visualization. Direction rasters are written as is (two-channel
/// ones padded with a zero blue channel); other rasters are scaled to their
/// valid-pixel range.
void export_map_png(const std::filesystem::path& path, const Raster& raster, bool direction);

} // namespace caric
