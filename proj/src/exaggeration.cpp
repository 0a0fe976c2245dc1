#include "caric/exaggeration.hpp"

#include "caric/error.hpp"

#include <algorithm>
#include <set>

namespace caric {

LambdaField LambdaField::constant(const FaceMesh& mesh, double value)
{
    LambdaField field;
    field.values = Eigen::VectorXd::Constant(mesh.vertex_count(), value);
    field.topology_id = mesh.topology_id();
    return field;
}

Eigen::SparseMatrix<double> uniform_laplacian(const FaceMesh& mesh)
{
    const int n = mesh.vertex_count();
    const auto rings = vertex_neighbors(mesh);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(n) * 7);
    for (int v = 0; v < n; ++v) {
        const auto& ring = rings[static_cast<std::size_t>(v)];
        if (ring.empty())
            throw Error(ErrorCode::InvalidMesh, "isolated vertex " + std::to_string(v) + " has no neighbours");
        entries.emplace_back(v, v, 1.0);
        const double w = 1.0 / static_cast<double>(ring.size());
        for (int u : ring)
            entries.emplace_back(v, u, -w);
    }
    Eigen::SparseMatrix<double> laplacian(n, n);
    laplacian.setFromTriplets(entries.begin(), entries.end());
    return laplacian;
}

LaplacianSet compute_laplacians(const FaceMesh& mesh)
{
    LaplacianSet set;
    set.deltas = uniform_laplacian(mesh) * mesh.vertices;
    return set;
}

std::shared_ptr<const SolverContext> SolverContext::prefactor(const FaceMesh& mesh, double anchor_weight)
{
    if (mesh.anchors.empty())
        throw Error(ErrorCode::SingularSystem, "anchor set is empty; the Laplacian system has no unique solution");
    if (!(anchor_weight > 0.0))
        throw Error(ErrorCode::InvalidArgument, "anchor weight must be positive");

    std::shared_ptr<SolverContext> ctx(new SolverContext());
    ctx->topology_id_ = mesh.topology_id();
    ctx->anchor_weight_ = anchor_weight;
    ctx->laplacian_ = uniform_laplacian(mesh);
    ctx->anchors_ = mesh.anchors;

    const int n = mesh.vertex_count();
    Eigen::SparseMatrix<double> normal = ctx->laplacian_.transpose() * ctx->laplacian_;
    Eigen::SparseMatrix<double> anchor_diag(n, n);
    std::vector<Eigen::Triplet<double>> diag;
    for (int a : mesh.anchors)
        diag.emplace_back(a, a, anchor_weight);
    anchor_diag.setFromTriplets(diag.begin(), diag.end());
    normal += anchor_diag;
    normal.makeCompressed();

    ctx->factor_.compute(normal);
    if (ctx->factor_.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "normal-equation factorization failed");

    std::set<int> handles;
    for (const auto& [name, path] : mesh.feature_curves)
        handles.insert(path.begin(), path.end());
    ctx->handle_vertices_.assign(handles.begin(), handles.end());
    if (!ctx->handle_vertices_.empty()) {
        Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(ctx->handle_vertices_.size()));
        for (std::size_t k = 0; k < ctx->handle_vertices_.size(); ++k)
            unit(ctx->handle_vertices_[k], static_cast<Eigen::Index>(k)) = 1.0;
        ctx->handle_inverse_ = ctx->factor_.solve(unit);
    }
    return ctx;
}

Eigen::MatrixXd SolverContext::solve(const Eigen::MatrixXd& rhs) const
{
    return factor_.solve(rhs);
}

Eigen::MatrixX3d SolverContext::normal_rhs(const Eigen::MatrixX3d& target_laplacians,
                                           const Eigen::MatrixX3d& anchor_positions) const
{
    Eigen::MatrixX3d rhs = laplacian_.transpose() * target_laplacians;
    for (int a : anchors_)
        rhs.row(a) += anchor_weight_ * anchor_positions.row(a);
    return rhs;
}

int SolverContext::handle_slot(int vertex) const
{
    const auto it = std::lower_bound(handle_vertices_.begin(), handle_vertices_.end(), vertex);
    if (it == handle_vertices_.end() || *it != vertex)
        return -1;
    return static_cast<int>(it - handle_vertices_.begin());
}

std::shared_ptr<const SolverContext> SolverCache::get(const FaceMesh& mesh, double anchor_weight)
{
    const auto key = std::make_pair(mesh.topology_id(), anchor_weight);
    {
        std::lock_guard lock(mutex_);
        if (auto it = contexts_.find(key); it != contexts_.end())
            return it->second;
    }
    auto ctx = SolverContext::prefactor(mesh, anchor_weight);
    std::lock_guard lock(mutex_);
    return contexts_.emplace(key, std::move(ctx)).first->second;
}

std::size_t SolverCache::size() const
{
    std::lock_guard lock(mutex_);
    return contexts_.size();
}

FaceMesh exaggerate(const FaceMesh& mesh, const LambdaField& lambda, const SolverContext& context,
                    const LambdaBounds& bounds)
{
    const std::uint64_t topology = mesh.topology_id();
    if (topology != context.topology_id() || lambda.topology_id != topology)
        throw Error(ErrorCode::TopologyMismatch, "lambda field, mesh and solver context must share one topology");
    if (lambda.values.size() != mesh.vertex_count())
        throw Error(ErrorCode::TopologyMismatch, "lambda field length differs from vertex count");
    for (Eigen::Index i = 0; i < lambda.values.size(); ++i) {
        if (!bounds.contains(lambda.values[i]))
            throw Error(ErrorCode::OutOfBounds, "lambda at vertex " + std::to_string(i) + " is outside bounds");
    }

    const Eigen::MatrixX3d deltas = context.laplacian() * mesh.vertices;
    const Eigen::MatrixX3d scaled = lambda.values.asDiagonal() * deltas;
    Eigen::MatrixX3d solved = context.solve(context.normal_rhs(scaled, mesh.vertices));
    return mesh.with_vertices(std::move(solved));
}

} // namespace caric
