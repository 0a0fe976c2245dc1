#pragma once

#include "caric/face_mesh.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace caric {

/// Reads geometry from an OBJ file (triangles only, vertex order preserved)
/// and annotations from a JSON sidecar:
///   { "region_labels": ["other", ...], "feature_curves": {"mouth": [..], ...},
///     "anchor_set": [..] }
FaceMesh load_face_mesh(const std::filesystem::path& obj_path, const std::filesystem::path& sidecar_path);

void save_face_mesh(const FaceMesh& mesh, const std::filesystem::path& obj_path,
                    const std::filesystem::path& sidecar_path);

/// OBJ text with full double round-trip precision.
std::string write_obj(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles);
void read_obj(const std::string& text, Eigen::MatrixX3d& vertices, Eigen::MatrixX3i& triangles);

nlohmann::json sidecar_to_json(const FaceMesh& mesh);
void sidecar_from_json(const nlohmann::json& json, FaceMesh& mesh);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace caric
