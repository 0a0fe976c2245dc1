#include "caric/sketch_match.hpp"

#include "caric/error.hpp"

#include <Eigen/Dense>

namespace caric {

MatchResult match_sketch(const FaceMesh& mesh, const Camera& camera, const SketchSet& edited,
                         const SolverContext& context, const CurveParams* params, const MatchOptions& options)
{
    if (mesh.topology_id() != context.topology_id())
        throw Error(ErrorCode::TopologyMismatch, "solver context belongs to another topology");
    camera.validate();
    CurveParams own;
    if (!params) {
        own = curve_params(project_curves(mesh, camera));
        params = &own;
    }

    // Work in camera coordinates: the Laplacian and anchor terms are
    // rotation invariant and separate per coordinate, and the constraints
    // only touch the first two.
    const Eigen::Matrix3d& rot = camera.rotation;
    const Eigen::MatrixX3d local = mesh.vertices * rot.transpose();

    struct Row {
        StationSample sample;
        Eigen::Vector2d target;
    };
    std::vector<Row> rows;
    for (const auto& [name, curve] : edited.curves) {
        const auto path = mesh.feature_curves.find(name);
        if (path == mesh.feature_curves.end())
            throw Error(ErrorCode::MissingCurve, "mesh has no feature curve '" + name + "'");
        const auto p = params->find(name);
        if (p == params->end())
            throw Error(ErrorCode::MissingCurve, "no station parameters for curve '" + name + "'");
        const auto samples = locate_stations(path->second, p->second, options.stations);
        const auto targets = resample(curve, options.stations);
        for (std::size_t k = 0; k < samples.size(); ++k)
            rows.push_back({samples[k], (targets[k] - camera.translation) / camera.scale});
    }
    if (rows.empty())
        return {mesh, 0.0};

    const auto& handles = context.handle_vertices();
    const Eigen::MatrixXd& inv = context.handle_inverse_columns();
    const Eigen::Index k_rows = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index u = static_cast<Eigen::Index>(handles.size());

    // B maps handle-slot values to station positions; r is the residual of
    // the current geometry.
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k_rows, u);
    Eigen::MatrixXd r(k_rows, 2);
    for (Eigen::Index k = 0; k < k_rows; ++k) {
        const Row& row = rows[static_cast<std::size_t>(k)];
        const int sa = context.handle_slot(row.sample.a);
        const int sb = context.handle_slot(row.sample.b);
        if (sa < 0 || sb < 0)
            throw Error(ErrorCode::InvalidArgument, "station vertex is not a feature-curve vertex of the context");
        b(k, sa) += 1.0 - row.sample.w;
        b(k, sb) += row.sample.w;
        const Eigen::RowVector2d current = (1.0 - row.sample.w) * local.row(row.sample.a).head<2>() +
                                           row.sample.w * local.row(row.sample.b).head<2>();
        r.row(k) = row.target.transpose() - current;
    }

    Eigen::MatrixXd inv_hh(u, u);
    for (Eigen::Index j = 0; j < u; ++j)
        inv_hh.row(j) = inv.row(handles[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd capacitance = b * inv_hh * b.transpose();
    capacitance.diagonal().array() += 1.0 / options.handle_weight;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(capacitance);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "station capacitance system could not be factored");
    const Eigen::MatrixXd z = ldlt.solve(r);
    const Eigen::MatrixXd delta = inv * (b.transpose() * z);
    if (!delta.allFinite())
        throw Error(ErrorCode::NonFinite, "sketch matching produced non-finite positions");

    Eigen::MatrixX3d moved = local;
    moved.leftCols<2>() += delta;
    MatchResult result;
    result.mesh = mesh.with_vertices(moved * rot);
    result.max_station_error_px = max_station_error(result.mesh, camera, edited, *params, options.stations);
    return result;
}

double max_station_error(const FaceMesh& mesh, const Camera& camera, const SketchSet& sketch,
                         const CurveParams& params, int stations)
{
    double worst = 0.0;
    CurveParams used;
    for (const auto& [name, curve] : sketch.curves)
        used.emplace(name, params.at(name));
    const auto projected = project_stations(mesh, camera, used, stations);
    for (const auto& [name, pts] : projected) {
        const auto targets = resample(sketch.curve(name), stations);
        for (std::size_t k = 0; k < pts.size(); ++k)
            worst = std::max(worst, (pts[k] - targets[k]).norm());
    }
    return worst;
}

} // namespace caric
