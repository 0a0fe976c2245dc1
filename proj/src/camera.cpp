#include "caric/camera.hpp"

#include "caric/error.hpp"
#include "caric/face_mesh.hpp"

#include <cmath>

namespace caric {

std::string_view view_name(View view)
{
    return view == View::Side ? "side" : "frontal";
}

View view_from_name(std::string_view name)
{
    if (name == "frontal")
        return View::Frontal;
    if (name == "side")
        return View::Side;
    throw Error(ErrorCode::InvalidArgument, "unknown view '" + std::string(name) + "'");
}

void Camera::validate() const
{
    if (!(scale > 0.0))
        throw Error(ErrorCode::InvalidArgument, "camera scale must be positive");
    if (!rotation.allFinite() || !translation.allFinite())
        throw Error(ErrorCode::InvalidArgument, "camera parameters must be finite");
    const double err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (err > 1e-6)
        throw Error(ErrorCode::InvalidArgument, "camera rotation is not orthonormal");
    if (width < 0 || height < 0)
        throw Error(ErrorCode::InvalidArgument, "camera image size must be non-negative");
}

Eigen::Matrix3d yaw_rotation(double radians)
{
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    Eigen::Matrix3d r;
    r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
    return r;
}

Camera Camera::side_view(const FaceMesh& mesh) const
{
    Camera side = *this;
    side.view = View::Side;
    side.rotation = yaw_rotation(M_PI / 2.0) * rotation;
    const Eigen::Vector3d centroid = mesh.vertices.colwise().mean().transpose();
    side.translation = project(centroid) - side.scale * (side.rotation.topRows<2>() * centroid);
    return side;
}

nlohmann::json camera_to_json(const Camera& camera)
{
    nlohmann::json json;
    json["view"] = std::string(view_name(camera.view));
    json["scale"] = camera.scale;
    json["rotation"] = {
        {camera.rotation(0, 0), camera.rotation(0, 1), camera.rotation(0, 2)},
        {camera.rotation(1, 0), camera.rotation(1, 1), camera.rotation(1, 2)},
        {camera.rotation(2, 0), camera.rotation(2, 1), camera.rotation(2, 2)},
    };
    json["translation"] = {camera.translation.x(), camera.translation.y()};
    json["image_size"] = {camera.width, camera.height};
    json["depth_offset"] = camera.depth_offset;
    return json;
}

Camera camera_from_json(const nlohmann::json& json)
{
    Camera camera;
    try {
        camera.view = view_from_name(json.value("view", std::string("frontal")));
        camera.scale = json.at("scale").get<double>();
        if (json.contains("rotation")) {
            const auto& r = json.at("rotation");
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    camera.rotation(i, j) = r.at(i).at(j).get<double>();
        }
        if (json.contains("translation")) {
            camera.translation.x() = json.at("translation").at(0).get<double>();
            camera.translation.y() = json.at("translation").at(1).get<double>();
        }
        camera.width = json.at("image_size").at(0).get<int>();
        camera.height = json.at("image_size").at(1).get<int>();
        camera.depth_offset = json.value("depth_offset", 100.0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, std::string("malformed camera: ") + e.what());
    }
    camera.validate();
    return camera;
}

} // namespace caric
