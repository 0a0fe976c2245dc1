#pragma once

#include "caric/lambda_field.hpp"
#include "caric/param_domain.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace caric {

struct DatasetConfig {
    std::uint64_t seed = 1;
    int n_styles = 10;
    SynthConfig synth;
    int map_resolution = 256;
    int image_width = 1080;
    int image_height = 1080;
    int stations = 64;
    int workers = 0; // 0 = hardware concurrency
};

/// One expression as a (neutral, expressive) source pair.
using ExpressionPair = std::pair<FaceMesh, FaceMesh>;

struct DatasetSample {
    std::string id;
    int mesh = 0;
    int style = 0;
    int expression = -1; // -1 for the neutral-only sample
    std::uint64_t seed = 0;
    std::map<std::string, std::string> files; // role -> path relative to the dataset root
};

struct DatasetManifest {
    std::vector<DatasetSample> samples;
    bool partial = false;
    std::string error;
};

/// Samples per (mesh, style): one per expression, or one neutral sample when
/// no expressions are given.
std::size_t dataset_sample_count(std::size_t meshes, std::size_t styles, std::size_t expressions);

/// Seed of style `style` for mesh `mesh`, derived from the dataset seed.
std::uint64_t style_seed(std::uint64_t seed, int mesh, int style);

/// For every (mesh, style): a synthetic lambda field, the exaggerated mesh,
/// and per expression the transferred input/exaggerated pair with its
/// flattened maps, lambda map and projected sketches. Writes
/// `out_dir`/manifest.jsonl (one record per sample, in (mesh, style,
/// expression) order) plus topology.obj/topology.json. On failure the
/// manifest lists the finished samples followed by a {"partial": true}
/// record, and the error is rethrown.
DatasetManifest generate_dataset(const std::vector<FaceMesh>& meshes, const std::vector<ExpressionPair>& expressions,
                                 const std::filesystem::path& out_dir, const DatasetConfig& config = {});

DatasetManifest read_manifest(const std::filesystem::path& out_dir);

/// Loads every sample listed in the manifest and checks the type invariants
/// of its artifacts. Returns the number of samples checked; throws on the
/// first violation.
std::size_t load_check(const std::filesystem::path& out_dir, const LambdaBounds& bounds = {});

/// Artifacts of one stored sample.
struct LoadedSample {
    FaceMesh input;
    FaceMesh exaggerated;
    LambdaField lambda;
    Raster lambda_map;
    FlattenedMaps maps;
    SketchSet input_sketch;
    SketchSet exaggerated_sketch;
    Camera camera;
};

LoadedSample load_sample(const std::filesystem::path& out_dir, const DatasetSample& sample);

} // namespace caric
