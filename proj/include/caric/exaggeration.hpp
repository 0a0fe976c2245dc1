#pragma once

#include "caric/face_mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace caric {

enum class LaplacianWeighting { Uniform };

struct LaplacianSet {
    Eigen::MatrixX3d deltas;
    LaplacianWeighting weighting = LaplacianWeighting::Uniform;
};

struct LambdaBounds {
    double min = 0.2;
    double max = 5.0;

    double clamp(double value) const { return value < min ? min : (value > max ? max : value); }
    bool contains(double value) const { return value >= min && value <= max; }
};

/// Per-vertex exaggeration factors for one mesh topology.
struct LambdaField {
    Eigen::VectorXd values;
    std::uint64_t topology_id = 0;

    static LambdaField constant(const FaceMesh& mesh, double value);
};

/// Uniform graph Laplacian L = I - D^-1 A. Throws on isolated vertices.
Eigen::SparseMatrix<double> uniform_laplacian(const FaceMesh& mesh);

LaplacianSet compute_laplacians(const FaceMesh& mesh);

/// Factorization of (L^T L + w_a A^T A) for one topology. Immutable after
/// construction, so one instance can serve concurrent solves.
class SolverContext {
public:
    static std::shared_ptr<const SolverContext> prefactor(const FaceMesh& mesh, double anchor_weight = 1.0);

    std::uint64_t topology_id() const { return topology_id_; }
    double anchor_weight() const { return anchor_weight_; }
    int vertex_count() const { return static_cast<int>(laplacian_.rows()); }
    const Eigen::SparseMatrix<double>& laplacian() const { return laplacian_; }
    const std::vector<int>& anchors() const { return anchors_; }

    /// Applies the inverse of the normal matrix column-wise.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    /// Right-hand side of the exaggeration system for target Laplacians and
    /// anchor positions.
    Eigen::MatrixX3d normal_rhs(const Eigen::MatrixX3d& target_laplacians, const Eigen::MatrixX3d& anchor_positions) const;

    /// Sorted feature-curve vertices and the columns of the inverse normal
    /// matrix for them, precomputed for handle-based solves.
    const std::vector<int>& handle_vertices() const { return handle_vertices_; }
    const Eigen::MatrixXd& handle_inverse_columns() const { return handle_inverse_; }
    int handle_slot(int vertex) const;

private:
    SolverContext() = default;

    std::uint64_t topology_id_ = 0;
    double anchor_weight_ = 1.0;
    Eigen::SparseMatrix<double> laplacian_;
    std::vector<int> anchors_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
    std::vector<int> handle_vertices_;
    Eigen::MatrixXd handle_inverse_;
};

/// Keeps one context per (topology, anchor weight).
class SolverCache {
public:
    std::shared_ptr<const SolverContext> get(const FaceMesh& mesh, double anchor_weight = 1.0);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::pair<std::uint64_t, double>, std::shared_ptr<const SolverContext>> contexts_;
};

/// Least-squares reconstruction from Laplacians scaled by lambda with soft
/// anchor constraints at the mesh's own anchor positions.
FaceMesh exaggerate(const FaceMesh& mesh, const LambdaField& lambda, const SolverContext& context,
                    const LambdaBounds& bounds = {});

} // namespace caric
