#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <string_view>

namespace caric {

struct FaceMesh;

enum class View { Frontal, Side };

std::string_view view_name(View view);
View view_from_name(std::string_view name);

/// Weak-perspective camera. Image coordinates are pixels with the origin at
/// the top-left corner and y pointing down; model y is taken to point down as
/// well, so an identity rotation maps model (x, y) straight to pixels.
/// Camera-space depth grows away from the viewer.
struct Camera {
    View view = View::Frontal;
    double scale = 1.0; // px per model unit
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
    int width = 0;
    int height = 0;
    double depth_offset = 100.0; // model units added to camera-space z

    Eigen::Vector2d project(const Eigen::Vector3d& p) const
    {
        return scale * (rotation.topRows<2>() * p) + translation;
    }

    double depth(const Eigen::Vector3d& p) const { return rotation.row(2).dot(p) + depth_offset; }

    /// The linear part of the projection (2x3).
    Eigen::Matrix<double, 2, 3> linear() const { return scale * rotation.topRows<2>(); }

    /// Throws InvalidArgument for non-positive scale or a non-orthonormal rotation.
    void validate() const;

    /// Camera yawed by 90 degrees about the model y axis, same scale, with
    /// the mesh's projected centroid kept where the frontal camera put it.
    Camera side_view(const FaceMesh& mesh) const;
};

Eigen::Matrix3d yaw_rotation(double radians);

nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& json);

} // namespace caric
