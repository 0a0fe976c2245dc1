#pragma once

#include "caric/camera.hpp"
#include "caric/face_mesh.hpp"

#include <Eigen/Core>

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace caric {

using Polyline = std::vector<Eigen::Vector2d>;

/// A projected feature curve. `params` gives each point's position along the
/// curve in [0, 1]. For a fresh projection they are the normalized arc length;
/// after an edit the untouched points keep theirs and the replacement spans
/// the erased interval by its own arc length, so the points keep
/// corresponding to the same places on the face.
struct SketchCurve {
    std::string name;
    Polyline points;
    std::vector<double> params;
    bool closed = false;

    /// Position at parameter t by linear interpolation between points.
    Eigen::Vector2d at(double t) const;
    double length() const;
};

struct SketchSet {
    View view = View::Frontal;
    std::map<std::string, SketchCurve> curves;

    const SketchCurve& curve(const std::string& name) const; // throws MissingCurve
};

struct SketchEdit {
    std::string curve;
    double s0 = 0.0;
    double s1 = 1.0;
    Polyline replacement;
};

struct SketchConfig {
    int stations = 64;
    double snap_radius_px = 12.0; // at the reference height below
    double reference_height = 1080.0;

    double snap_radius(int image_height) const
    {
        return image_height > 0 ? snap_radius_px * image_height / reference_height : snap_radius_px;
    }
};

/// Per-curve displacement at uniformly spaced parameter stations t_k = k/(N-1).
struct DisplacementSet {
    View view = View::Frontal;
    int stations = 64;
    std::map<std::string, std::vector<Eigen::Vector2d>> curves;
};

/// Parameter of every vertex on each feature path, aligned with the path.
using CurveParams = std::map<std::string, std::vector<double>>;

/// Normalized cumulative arc length of a polyline (zeros if it has no length).
std::vector<double> arc_length_params(const Polyline& points);

SketchSet project_curves(const FaceMesh& mesh, const Camera& camera);

CurveParams curve_params(const SketchSet& projected);

/// Replaces the part of the curve with parameter in [s0, s1] by the
/// replacement. Interior ends of the erased interval must be within the snap
/// radius of the replacement's ends; they are then snapped exactly and the
/// correction is blended linearly along the replacement.
SketchSet apply_edit(const SketchSet& sketch, const SketchEdit& edit, int image_height, const SketchConfig& config = {});

std::vector<Eigen::Vector2d> resample(const SketchCurve& curve, int stations);

DisplacementSet correspondence_displacements(const SketchSet& base, const SketchSet& edited, int stations = 64);

/// Where the stations of each feature curve sit on the mesh: the parameter of
/// station k is located on the vertex path using `params`, giving a pair of
/// path vertices and an interpolation weight.
struct StationSample {
    int a = 0;
    int b = 0;
    double w = 0.0; // position = (1 - w) * v_a + w * v_b
};

std::vector<StationSample> locate_stations(const std::vector<int>& path, const std::vector<double>& params, int stations);

/// Projected mesh positions at the stations of every feature curve listed in
/// `params`.
std::map<std::string, std::vector<Eigen::Vector2d>> project_stations(const FaceMesh& mesh, const Camera& camera,
                                                                     const CurveParams& params, int stations);

nlohmann::json sketch_to_json(const SketchSet& sketch);
SketchSet sketch_from_json(const nlohmann::json& json);
nlohmann::json edit_to_json(const SketchEdit& edit);
SketchEdit edit_from_json(const nlohmann::json& json);
nlohmann::json displacements_to_json(const DisplacementSet& set);

double hausdorff_distance(const Polyline& a, const Polyline& b);

} // namespace caric
