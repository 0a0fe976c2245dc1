#pragma once

#include "caric/camera.hpp"
#include "caric/face_mesh.hpp"

#include <cstdint>
#include <vector>

namespace caric {

/// Procedural head-like surface: a latitude/longitude patch of an ellipsoid
/// wrapping past the ears, with facial relief added along the surface normal.
/// The patch spans longitudes beyond +-90 degrees so it has a backfacing part
/// that carries the anchors. Model y points down and the face looks toward -z.
struct FaceShapeParams {
    int rows = 64;
    int cols = 64;
    double half_width = 1.0;
    double half_height = 1.3;
    double half_depth = 0.9;
    double longitude_extent_deg = 125.0;
    double latitude_extent_deg = 62.0;

    double nose = 0.32;
    double brow = 0.07;
    double eye_socket = 0.06;
    double cheek = 0.06;
    double lips = 0.04;
    double chin = 0.08;

    /// Extra random low-frequency bumps for identity variation.
    int identity_bumps = 0;
    double identity_amplitude = 0.03;
    std::uint64_t seed = 0;

    int anchor_stride = 3;
    double anchor_longitude_deg = 105.0;
};

struct FaceExpression {
    double smile = 0.0;
    double jaw_open = 0.0;
    double brow_raise = 0.0;
};

FaceMesh make_face_mesh(const FaceShapeParams& params, const FaceExpression& expression = {});

/// Face-frame coordinates (fu, fv) of each grid vertex: fu = +-1 at the
/// silhouette sides, fv = -1 at the top row and +1 at the bottom row.
std::vector<Eigen::Vector2d> face_coordinates(const FaceShapeParams& params);

/// Randomized proportions and relief amplitudes around the defaults.
FaceShapeParams random_face_params(std::uint64_t seed, int rows, int cols);

/// Longitude/latitude sphere: two poles plus `rings` latitude rings of
/// `segments` vertices.
FaceMesh make_uv_sphere(int rings, int segments, double radius = 1.0);

FaceMesh make_icosphere(int subdivisions, double radius = 1.0);

/// Polar-grid spherical cap around the -z pole (disk topology).
FaceMesh make_sphere_cap(int rings, int segments, double max_polar_deg, double radius = 1.0);

/// Picks the six vertices closest to +-x, +-y, +-z as anchors.
std::vector<int> axis_anchors(const Eigen::MatrixX3d& vertices);

/// Frontal camera fitting the silhouette (or whole mesh) to `fill` of the
/// image height, centred.
Camera fit_frontal_camera(const FaceMesh& mesh, int width, int height, double fill = 0.7);

} // namespace caric
