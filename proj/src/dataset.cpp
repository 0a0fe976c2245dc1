#include "caric/dataset.hpp"

#include "caric/deformation_transfer.hpp"
#include "caric/error.hpp"
#include "caric/mesh_io.hpp"
#include "caric/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

namespace caric {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string sample_id(int mesh, int style, int expression)
{
    char buf[64];
    if (expression < 0)
        std::snprintf(buf, sizeof buf, "m%04d_s%03d", mesh, style);
    else
        std::snprintf(buf, sizeof buf, "m%04d_s%03d_e%03d", mesh, style, expression);
    return buf;
}

json sample_to_json(const DatasetSample& s)
{
    json files = json::object();
    for (const auto& [role, path] : s.files)
        files[role] = path;
    return {{"id", s.id}, {"mesh", s.mesh}, {"style", s.style}, {"expression", s.expression},
            {"seed", s.seed}, {"files", files}};
}

json lambda_to_json(const LambdaField& lambda)
{
    return {{"topology_id", std::to_string(lambda.topology_id)},
            {"values", std::vector<double>(lambda.values.data(), lambda.values.data() + lambda.values.size())}};
}

LambdaField lambda_from_json(const json& j)
{
    LambdaField f;
    f.topology_id = std::stoull(j.at("topology_id").get<std::string>());
    const auto v = j.at("values").get<std::vector<double>>();
    f.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return f;
}

// Projects a mesh's curves but keeps the base curves' point parameters, so
// the two sketches correspond point for point.
SketchSet project_with_params(const FaceMesh& mesh, const Camera& camera, const SketchSet& base)
{
    SketchSet s = project_curves(mesh, camera);
    for (auto& [name, curve] : s.curves)
        curve.params = base.curve(name).params;
    return s;
}

void write_manifest(const fs::path& out_dir, const DatasetManifest& manifest)
{
    std::string text;
    for (const auto& s : manifest.samples)
        text += sample_to_json(s).dump() + "\n";
    if (manifest.partial)
        text += json{{"partial", true}, {"error", manifest.error}}.dump() + "\n";
    write_text_file(out_dir / "manifest.jsonl", text);
}

FaceMesh with_topology(const FaceMesh& topology, const fs::path& obj)
{
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i t;
    read_obj(read_text_file(obj), v, t);
    if (t.rows() != topology.triangles.rows() || t != topology.triangles)
        throw Error(ErrorCode::TopologyMismatch, obj.string() + " does not match the dataset topology");
    FaceMesh m = topology.with_vertices(std::move(v));
    m.validate();
    return m;
}

} // namespace

std::size_t dataset_sample_count(std::size_t meshes, std::size_t styles, std::size_t expressions)
{
    return meshes * styles * std::max<std::size_t>(1, expressions);
}

std::uint64_t style_seed(std::uint64_t seed, int mesh, int style)
{
    return splitmix(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(mesh))) + static_cast<std::uint64_t>(style));
}

DatasetManifest generate_dataset(const std::vector<FaceMesh>& meshes, const std::vector<ExpressionPair>& expressions,
                                 const fs::path& out_dir, const DatasetConfig& config)
{
    if (meshes.empty())
        throw Error(ErrorCode::InvalidArgument, "dataset needs at least one mesh");
    if (config.n_styles < 1)
        throw Error(ErrorCode::InvalidArgument, "dataset needs at least one style");
    const FaceMesh& ref = meshes.front();
    const std::uint64_t topology = ref.topology_id();
    for (const auto& m : meshes) {
        m.validate();
        if (m.topology_id() != topology)
            throw Error(ErrorCode::TopologyMismatch, "dataset meshes must share one topology");
    }
    for (const auto& [n, e] : expressions)
        if (n.topology_id() != topology || e.topology_id() != topology)
            throw Error(ErrorCode::TopologyMismatch, "expression pairs must share the dataset topology");

    fs::create_directories(out_dir);
    write_text_file(out_dir / "topology.obj", write_obj(ref.vertices, ref.triangles));
    write_text_file(out_dir / "topology.json", sidecar_to_json(ref).dump(1));

    const auto context = SolverContext::prefactor(ref);
    const ParamChart chart = ParamChart::build(ref, config.map_resolution);

    const int units = static_cast<int>(meshes.size()) * config.n_styles;
    const int per_unit = std::max(1, static_cast<int>(expressions.size()));
    std::vector<std::vector<DatasetSample>> done(static_cast<std::size_t>(units));
    std::vector<char> finished(static_cast<std::size_t>(units), 0);
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string first_error;
    std::exception_ptr first_exception;

    auto run_unit = [&](int unit) {
        const int mi = unit / config.n_styles;
        const int style = unit % config.n_styles;
        const FaceMesh& mesh = meshes[static_cast<std::size_t>(mi)];
        const std::uint64_t seed = style_seed(config.seed, mi, style);
        const SynthResult synth = synth_exaggeration(mesh, seed, config.synth);
        const FaceMesh exaggerated = exaggerate(mesh, synth.lambda, *context);
        const Raster lambda_map = lambda_to_map(chart, synth.lambda);

        for (int e = 0; e < per_unit; ++e) {
            const int expr = expressions.empty() ? -1 : e;
            FaceMesh input = mesh;
            FaceMesh target = exaggerated;
            if (expr >= 0) {
                const auto& [src_n, src_e] = expressions[static_cast<std::size_t>(expr)];
                input = deformation_transfer(src_n, src_e, mesh);
                target = deformation_transfer(src_n, src_e, exaggerated);
            }
            const Camera camera = fit_frontal_camera(input, config.image_width, config.image_height);
            const SketchSet base = project_curves(input, camera);
            const SketchSet edited = project_with_params(target, camera, base);
            const DisplacementSet disp = correspondence_displacements(base, edited, config.stations);

            FlattenedMaps maps;
            flatten_laplacians(chart, compute_laplacians(input), maps.laplacian_direction, maps.laplacian_magnitude);
            flatten_sketch(chart, input, disp, curve_params(base), camera, maps.sketch_direction,
                           maps.sketch_magnitude);

            DatasetSample s;
            s.id = sample_id(mi, style, expr);
            s.mesh = mi;
            s.style = style;
            s.expression = expr;
            s.seed = seed;
            const std::string dir = "samples/" + s.id + "/";
            s.files = {{"input", dir + "input.obj"},
                       {"exaggerated", dir + "exaggerated.obj"},
                       {"lambda", dir + "lambda.json"},
                       {"lambda_map", dir + "lambda_map.crst"},
                       {"maps", dir + "maps.crsb"},
                       {"input_sketch", dir + "input_sketch.json"},
                       {"exaggerated_sketch", dir + "exaggerated_sketch.json"},
                       {"camera", dir + "camera.json"}};
            write_text_file(out_dir / s.files["input"], write_obj(input.vertices, input.triangles));
            write_text_file(out_dir / s.files["exaggerated"], write_obj(target.vertices, target.triangles));
            write_text_file(out_dir / s.files["lambda"], lambda_to_json(synth.lambda).dump());
            write_raster(out_dir / s.files["lambda_map"], lambda_map);
            write_text_file(out_dir / s.files["maps"], encode_bundle(maps.as_bundle()));
            write_text_file(out_dir / s.files["input_sketch"], sketch_to_json(base).dump());
            write_text_file(out_dir / s.files["exaggerated_sketch"], sketch_to_json(edited).dump());
            write_text_file(out_dir / s.files["camera"], camera_to_json(camera).dump());
            done[static_cast<std::size_t>(unit)].push_back(std::move(s));
        }
    };

    auto worker = [&] {
        for (;;) {
            if (failed)
                return;
            const int unit = next++;
            if (unit >= units)
                return;
            try {
                run_unit(unit);
                finished[static_cast<std::size_t>(unit)] = 1;
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!failed) {
                    first_error = e.what();
                    first_exception = std::current_exception();
                }
                failed = true;
            }
        }
    };

    int workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, units);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    DatasetManifest manifest;
    for (int u = 0; u < units; ++u)
        if (finished[static_cast<std::size_t>(u)])
            for (auto& s : done[static_cast<std::size_t>(u)])
                manifest.samples.push_back(std::move(s));
    if (failed) {
        manifest.partial = true;
        manifest.error = first_error;
    }
    write_manifest(out_dir, manifest);
    if (first_exception)
        std::rethrow_exception(first_exception);
    return manifest;
}

DatasetManifest read_manifest(const fs::path& out_dir)
{
    DatasetManifest manifest;
    std::istringstream in(read_text_file(out_dir / "manifest.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const json j = json::parse(line);
        if (j.contains("partial")) {
            manifest.partial = j.at("partial").get<bool>();
            manifest.error = j.value("error", "");
            continue;
        }
        DatasetSample s;
        s.id = j.at("id").get<std::string>();
        s.mesh = j.at("mesh").get<int>();
        s.style = j.at("style").get<int>();
        s.expression = j.at("expression").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.files = j.at("files").get<std::map<std::string, std::string>>();
        manifest.samples.push_back(std::move(s));
    }
    return manifest;
}

LoadedSample load_sample(const fs::path& out_dir, const DatasetSample& sample)
{
    FaceMesh topology;
    read_obj(read_text_file(out_dir / "topology.obj"), topology.vertices, topology.triangles);
    sidecar_from_json(json::parse(read_text_file(out_dir / "topology.json")), topology);

    auto path = [&](const char* role) {
        const auto it = sample.files.find(role);
        if (it == sample.files.end())
            throw Error(ErrorCode::Io, "sample " + sample.id + " lists no '" + role + "' file");
        return out_dir / it->second;
    };
    LoadedSample s;
    s.input = with_topology(topology, path("input"));
    s.exaggerated = with_topology(topology, path("exaggerated"));
    s.lambda = lambda_from_json(json::parse(read_text_file(path("lambda"))));
    s.lambda_map = read_raster(path("lambda_map"));
    s.maps = FlattenedMaps::from_bundle(decode_bundle(read_text_file(path("maps"))));
    s.input_sketch = sketch_from_json(json::parse(read_text_file(path("input_sketch"))));
    s.exaggerated_sketch = sketch_from_json(json::parse(read_text_file(path("exaggerated_sketch"))));
    s.camera = camera_from_json(json::parse(read_text_file(path("camera"))));
    return s;
}

std::size_t load_check(const fs::path& out_dir, const LambdaBounds& bounds)
{
    const DatasetManifest manifest = read_manifest(out_dir);
    if (manifest.partial)
        throw Error(ErrorCode::Io, "dataset manifest is flagged partial: " + manifest.error);
    for (const auto& sample : manifest.samples) {
        const LoadedSample s = load_sample(out_dir, sample);
        const std::uint64_t topology = s.input.topology_id();
        const auto fail = [&](const std::string& what) {
            throw Error(ErrorCode::ContractViolation, "sample " + sample.id + ": " + what);
        };
        if (s.lambda.topology_id != topology || s.lambda.values.size() != s.input.vertex_count())
            fail("lambda field does not match the topology");
        for (Eigen::Index i = 0; i < s.lambda.values.size(); ++i)
            if (!bounds.contains(s.lambda.values[i]))
                fail("lambda outside bounds");
        const int r = s.lambda_map.width;
        if (s.lambda_map.channels != 1 || s.lambda_map.height != r)
            fail("lambda map is not a square single-channel raster");
        for (const Raster* m : {&s.maps.laplacian_direction, &s.maps.laplacian_magnitude, &s.maps.sketch_direction,
                                &s.maps.sketch_magnitude}) {
            if (m->width != r || m->height != r)
                fail("flattened map resolution differs from the lambda map");
            for (float v : m->data)
                if (!std::isfinite(v))
                    fail("flattened map holds a non-finite value");
        }
        s.camera.validate();
        for (const SketchSet* sk : {&s.input_sketch, &s.exaggerated_sketch}) {
            for (const auto& [name, curve] : sk->curves) {
                if (!s.input.feature_curves.count(name))
                    fail("sketch curve '" + name + "' is not a feature curve");
                if (curve.points.size() != s.input.feature_curves.at(name).size() ||
                    curve.params.size() != curve.points.size())
                    fail("sketch curve '" + name + "' has the wrong point count");
            }
        }
    }
    return manifest.samples.size();
}

} // namespace caric
