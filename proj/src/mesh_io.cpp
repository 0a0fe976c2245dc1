#include "caric/mesh_io.hpp"

#include "caric/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace caric {

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out)
            throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string write_obj(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& triangles)
{
    std::string out;
    out.reserve(static_cast<std::size_t>(vertices.rows()) * 64 + static_cast<std::size_t>(triangles.rows()) * 24);
    char line[160];
    for (int v = 0; v < vertices.rows(); ++v) {
        const int len = std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", vertices(v, 0), vertices(v, 1), vertices(v, 2));
        out.append(line, static_cast<std::size_t>(len));
    }
    for (int t = 0; t < triangles.rows(); ++t) {
        const int len = std::snprintf(line, sizeof line, "f %d %d %d\n", triangles(t, 0) + 1, triangles(t, 1) + 1, triangles(t, 2) + 1);
        out.append(line, static_cast<std::size_t>(len));
    }
    return out;
}

void read_obj(const std::string& text, Eigen::MatrixX3d& vertices, Eigen::MatrixX3i& triangles)
{
    std::vector<double> coords;
    std::vector<int> faces;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.size() < 2)
            continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw Error(ErrorCode::Io, "malformed vertex on line " + std::to_string(line_no));
            coords.insert(coords.end(), {x, y, z});
        } else if (tag == "f") {
            std::vector<int> ids;
            std::string token;
            while (ls >> token) {
                const auto slash = token.find('/');
                const std::string head = token.substr(0, slash);
                int id = 0;
                const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), id);
                if (ec != std::errc())
                    throw Error(ErrorCode::Io, "malformed face on line " + std::to_string(line_no));
                const int count = static_cast<int>(coords.size() / 3);
                ids.push_back(id < 0 ? count + id : id - 1);
            }
            if (ids.size() != 3)
                throw Error(ErrorCode::InvalidMesh, "non-triangle face on line " + std::to_string(line_no));
            faces.insert(faces.end(), ids.begin(), ids.end());
        }
    }
    vertices.resize(static_cast<Eigen::Index>(coords.size() / 3), 3);
    for (Eigen::Index v = 0; v < vertices.rows(); ++v)
        for (int k = 0; k < 3; ++k)
            vertices(v, k) = coords[static_cast<std::size_t>(v * 3 + k)];
    triangles.resize(static_cast<Eigen::Index>(faces.size() / 3), 3);
    for (Eigen::Index t = 0; t < triangles.rows(); ++t)
        for (int k = 0; k < 3; ++k)
            triangles(t, k) = faces[static_cast<std::size_t>(t * 3 + k)];
}

nlohmann::json sidecar_to_json(const FaceMesh& mesh)
{
    nlohmann::json json;
    auto& labels = json["region_labels"] = nlohmann::json::array();
    for (Region r : mesh.region_labels)
        labels.push_back(std::string(region_name(r)));
    auto& curves = json["feature_curves"] = nlohmann::json::object();
    for (const auto& [name, path] : mesh.feature_curves)
        curves[name] = path;
    json["anchor_set"] = mesh.anchors;
    if (mesh.chart_uv.rows() > 0) {
        auto& uv = json["chart_uv"] = nlohmann::json::array();
        for (Eigen::Index i = 0; i < mesh.chart_uv.rows(); ++i)
            uv.push_back({mesh.chart_uv(i, 0), mesh.chart_uv(i, 1)});
    }
    return json;
}

void sidecar_from_json(const nlohmann::json& json, FaceMesh& mesh)
{
    try {
        mesh.region_labels.clear();
        for (const auto& label : json.at("region_labels")) {
            if (label.is_number_integer()) {
                const int id = label.get<int>();
                if (id < 0 || id >= kRegionCount)
                    throw Error(ErrorCode::InvalidMesh, "region id out of range");
                mesh.region_labels.push_back(static_cast<Region>(id));
            } else {
                const auto region = region_from_name(label.get<std::string>());
                if (!region)
                    throw Error(ErrorCode::InvalidMesh, "unknown region label " + label.get<std::string>());
                mesh.region_labels.push_back(*region);
            }
        }
        mesh.feature_curves.clear();
        for (const auto& [name, path] : json.at("feature_curves").items())
            mesh.feature_curves[name] = path.get<std::vector<int>>();
        mesh.anchors = json.at("anchor_set").get<std::vector<int>>();
        mesh.chart_uv.resize(0, 2);
        if (json.contains("chart_uv")) {
            const auto& uv = json.at("chart_uv");
            mesh.chart_uv.resize(static_cast<Eigen::Index>(uv.size()), 2);
            for (std::size_t i = 0; i < uv.size(); ++i) {
                mesh.chart_uv(static_cast<Eigen::Index>(i), 0) = uv.at(i).at(0).get<double>();
                mesh.chart_uv(static_cast<Eigen::Index>(i), 1) = uv.at(i).at(1).get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, std::string("malformed mesh sidecar: ") + e.what());
    }
}

FaceMesh load_face_mesh(const std::filesystem::path& obj_path, const std::filesystem::path& sidecar_path)
{
    FaceMesh mesh;
    read_obj(read_text_file(obj_path), mesh.vertices, mesh.triangles);
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_text_file(sidecar_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, "cannot parse " + sidecar_path.string() + ": " + e.what());
    }
    sidecar_from_json(sidecar, mesh);
    mesh.validate();
    return mesh;
}

void save_face_mesh(const FaceMesh& mesh, const std::filesystem::path& obj_path, const std::filesystem::path& sidecar_path)
{
    write_text_file(obj_path, write_obj(mesh.vertices, mesh.triangles));
    write_text_file(sidecar_path, sidecar_to_json(mesh).dump(1) + "\n");
}

} // namespace caric
