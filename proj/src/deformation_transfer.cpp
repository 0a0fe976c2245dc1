#include "caric/deformation_transfer.hpp"

#include "caric/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace caric {

namespace {

Eigen::Matrix3d triangle_frame(const Eigen::MatrixX3d& vertices, const Eigen::Vector3i& tri, int index)
{
    const Eigen::Vector3d a = vertices.row(tri[0]);
    const Eigen::Vector3d b = vertices.row(tri[1]);
    const Eigen::Vector3d c = vertices.row(tri[2]);
    const Eigen::Vector3d e1 = b - a;
    const Eigen::Vector3d e2 = c - a;
    const Eigen::Vector3d n = e1.cross(e2);
    const double len = n.norm();
    if (!(len > 1e-300))
        throw Error(ErrorCode::DegenerateTriangle, "triangle " + std::to_string(index) + " has zero area");
    Eigen::Matrix3d frame;
    frame.col(0) = e1;
    frame.col(1) = e2;
    frame.col(2) = n / std::sqrt(len);
    return frame;
}

} // namespace

FaceMesh deformation_transfer(const FaceMesh& source_neutral, const FaceMesh& source_expr,
                              const FaceMesh& target_neutral, double anchor_weight)
{
    const std::uint64_t topology = target_neutral.topology_id();
    if (source_neutral.topology_id() != topology || source_expr.topology_id() != topology)
        throw Error(ErrorCode::TopologyMismatch, "deformation transfer needs three meshes of one topology");
    if (target_neutral.anchors.empty())
        throw Error(ErrorCode::SingularSystem, "anchor set is empty");

    const int n = target_neutral.vertex_count();
    const int m = target_neutral.triangle_count();
    const int unknowns = n + m;

    // Rows: for triangle j and frame column k, the k-th entry of
    // (row c of target frame) * W_j^{-1} must equal S_j(c, k).
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(m) * 12);
    Eigen::MatrixXd rhs(3 * m, 3);
    for (int j = 0; j < m; ++j) {
        const Eigen::Vector3i tri = target_neutral.triangles.row(j);
        const Eigen::Matrix3d source_frame = triangle_frame(source_neutral.vertices, tri, j);
        const Eigen::Matrix3d expr_frame = triangle_frame(source_expr.vertices, tri, j);
        const Eigen::Matrix3d gradient = expr_frame * source_frame.inverse();
        const Eigen::Matrix3d target_inv = triangle_frame(target_neutral.vertices, tri, j).inverse();

        for (int k = 0; k < 3; ++k) {
            const int row = 3 * j + k;
            entries.emplace_back(row, tri[0], -(target_inv(0, k) + target_inv(1, k) + target_inv(2, k)));
            entries.emplace_back(row, tri[1], target_inv(0, k));
            entries.emplace_back(row, tri[2], target_inv(1, k));
            entries.emplace_back(row, n + j, target_inv(2, k));
            for (int c = 0; c < 3; ++c)
                rhs(row, c) = gradient(c, k);
        }
    }
    Eigen::SparseMatrix<double> system(3 * m, unknowns);
    system.setFromTriplets(entries.begin(), entries.end());

    Eigen::SparseMatrix<double> normal = system.transpose() * system;
    Eigen::MatrixXd normal_rhs = system.transpose() * rhs;
    std::vector<Eigen::Triplet<double>> anchor_entries;
    for (int a : target_neutral.anchors) {
        anchor_entries.emplace_back(a, a, anchor_weight);
        normal_rhs.row(a) += anchor_weight * target_neutral.vertices.row(a);
    }
    Eigen::SparseMatrix<double> anchor_diag(unknowns, unknowns);
    anchor_diag.setFromTriplets(anchor_entries.begin(), anchor_entries.end());
    normal += anchor_diag;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "deformation transfer system is singular");
    const Eigen::MatrixXd solution = solver.solve(normal_rhs);
    return target_neutral.with_vertices(solution.topRows(n));
}

} // namespace caric
