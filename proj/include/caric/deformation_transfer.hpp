#pragma once

#include "caric/face_mesh.hpp"

namespace caric {

/// Transfers the deformation source_neutral -> source_expr onto target_neutral.
///
/// Each triangle gets a fourth vertex offset along its normal by
/// n / sqrt(|n|) (n = unnormalized cross product), so the 3x3 frame
/// [v2-v1, v3-v1, v4-v1] is invertible and scales linearly with the triangle.
/// The target vertices and fourth vertices are solved so that target frames
/// match the source deformation gradients in least squares, with soft anchors
/// holding the anchor set at target_neutral positions.
FaceMesh deformation_transfer(const FaceMesh& source_neutral, const FaceMesh& source_expr,
                              const FaceMesh& target_neutral, double anchor_weight = 1.0);

} // namespace caric
