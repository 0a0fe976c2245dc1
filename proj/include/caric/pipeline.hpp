#pragma once

#include "caric/camera.hpp"
#include "caric/composite.hpp"
#include "caric/detail.hpp"
#include "caric/exaggeration.hpp"
#include "caric/face_mesh.hpp"
#include "caric/lambda_field.hpp"
#include "caric/param_domain.hpp"
#include "caric/predictor.hpp"
#include "caric/raster.hpp"
#include "caric/relight.hpp"
#include "caric/render.hpp"
#include "caric/sketch.hpp"
#include "caric/sketch_match.hpp"
#include "caric/synthetic.hpp"
#include "caric/warp.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace caric {

struct SessionConfig {
    int stations = 64;
    SketchConfig sketch;
    EstimatorOptions estimator;
    MatchOptions match;
    LambdaBounds bounds;
    int basis_smoothing = 10;
    int chart_resolution = 256;
    bool enhance_detail = true;
    int patch = 256;
    int patch_stride = 192;
    int enhance_workers = 0;
    SeamOptions seam;
    PoissonOptions poisson;
    FillOptions fill;
    WarpOptions warp;
    LightingOptions lighting;
    int lighting_max_pixels = 20000; // the lighting fit subsamples larger regions
    AlphaOptions alpha;
};

nlohmann::json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const nlohmann::json& json);

struct EditPreview {
    View view = View::Frontal;
    SketchSet sketch;                          // reprojection of the current mesh
    std::vector<Eigen::Vector2d> projection;   // every vertex of the current mesh in that view
    double max_station_error_px = 0.0;
    double lambda_min = 1.0;
    double lambda_max = 1.0;
    bool changed = false;
};

nlohmann::json preview_to_json(const EditPreview& preview);

/// Names of the intermediates written by dump_stages, in pipeline order.
const std::vector<std::string>& dumped_stage_names();

/// One editing session: the input photo and meshes, the sketch targets per
/// view, the current lambda and meshes, and the cached synthesis stages.
/// Every public member locks the session, so one mutating call runs at a time.
class Session {
public:
    Session(std::string id, Raster photo, FaceMesh mesh, FaceMesh neutral, Camera camera, SessionConfig config = {});

    static std::shared_ptr<Session> load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    const std::string& id() const { return id_; }
    int width() const { return photo_.width; }
    int height() const { return photo_.height; }
    const SessionConfig& config() const { return config_; }

    /// The photo camera for the frontal view (rotation dropped when the photo
    /// is not frontal), its side view otherwise.
    Camera view_camera(View view) const;
    SketchSet sketch(View view) const;
    EditPreview preview(View view) const;

    EditPreview edit(const SketchEdit& edit, View view);

    /// Runs the stages that are out of date and returns the final image.
    /// `cancel` is polled between stages.
    Raster synthesize(const std::atomic<bool>* cancel = nullptr);
    bool has_result() const;
    Raster result() const;

    void ear_edit(const std::vector<Eigen::Vector2d>& boundary_curve, const std::vector<Eigen::Vector2d>& redrawn,
                  const EarEditOptions& options = {});
    /// Replaces the mouth interior with a template; `kind` is one of
    /// mouth_template_names().
    void mouth_fill(const std::string& kind);

    std::map<std::string, Raster> stage_images() const;
    void dump_stages(const std::filesystem::path& dir) const;

    std::map<std::string, int> stage_runs() const;
    /// Wall time of each stage in the last synthesize call, ms.
    std::map<std::string, double> stage_timings() const;
    LambdaField lambda() const;
    FaceMesh input_mesh() const;
    FaceMesh current_mesh() const;
    Raster photo() const;
    int version() const;

    void set_predictor(std::shared_ptr<LambdaPredictor> predictor);

private:
    struct Geometry {
        LambdaField lambda;
        FaceMesh neutral_exaggerated;    // M0_c
        FaceMesh expression_exaggerated; // Me_c
        FaceMesh current;                // M_c
        std::map<View, SketchSet> targets;
    };
    struct Artifacts {
        std::optional<RenderOutput> render;
        std::optional<Raster> enhanced;
        std::optional<Raster> background;
        std::optional<SeamResult> seam;
        std::optional<Raster> blended;
        std::optional<Raster> filled;
        std::optional<Raster> alpha;
        std::optional<Raster> shaded;
        std::optional<Raster> result;
        nlohmann::json post_edits = nlohmann::json::array();
    };

    Session() = default;
    void prepare();
    SketchSet sketch_locked(View view) const;
    EditPreview preview_locked(View view, const Geometry& geometry) const;
    Geometry solve_geometry(const std::map<View, SketchSet>& targets, View view) const;
    const LightingResult& lighting_locked();
    Mask mouth_target(const RenderOutput& render) const;

    std::string id_;
    SessionConfig config_;
    Raster photo_;
    FaceMesh mesh_;
    FaceMesh neutral_;
    bool has_expression_ = false;
    Camera camera_;
    std::map<View, CurveParams> params_;    // station parameters of the input projection
    std::map<View, SketchSet> reference_;   // input projection with those parameters
    std::shared_ptr<const SolverContext> context_;
    std::shared_ptr<LambdaBasis> basis_;
    std::shared_ptr<ParamChart> chart_;
    std::shared_ptr<LambdaPredictor> predictor_;

    int version_ = 0;
    Geometry geometry_;
    Artifacts artifacts_;
    std::optional<LightingResult> lighting_;
    std::map<std::string, int> runs_;
    std::map<std::string, double> timings_;
    mutable std::mutex mutex_;
};

const std::vector<std::string>& mouth_template_names();
/// Template image and the outline of its mouth opening, in template pixels.
Raster mouth_template(const std::string& kind, std::vector<Eigen::Vector2d>* outline = nullptr);

/// Synthetic session: a face grid rendered under default lighting.
struct DemoConfig {
    int rows = 48;
    int cols = 48;
    int width = 512;
    int height = 512;
    std::uint64_t seed = 7;
    FaceExpression expression;
};
std::shared_ptr<Session> make_demo_session(const std::string& id, const DemoConfig& demo = {},
                                           const SessionConfig& config = {});

/// Sessions by id, optionally persisted under a root directory after each
/// mutation.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root = {}) : root_(std::move(root)) {}

    std::string add(std::shared_ptr<Session> session);
    std::shared_ptr<Session> get(const std::string& id);
    std::string next_id();
    void persist(const Session& session) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
    mutable std::mutex mutex_;
};

} // namespace caric
