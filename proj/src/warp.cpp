#include "caric/warp.hpp"

#include "caric/error.hpp"
#include "caric/image_ops.hpp"
#include "caric/render.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace caric {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Projector onto the complement of the similarity images of a rest triangle,
// in interleaved (x0, y0, x1, y1, x2, y2) order.
Eigen::Matrix<double, 6, 6> similarity_residual(const Eigen::Matrix<double, 3, 2>& rest)
{
    Eigen::Matrix<double, 6, 4> basis;
    for (int i = 0; i < 3; ++i) {
        const double x = rest(i, 0), y = rest(i, 1);
        basis.row(2 * i) << x, -y, 1, 0;
        basis.row(2 * i + 1) << y, x, 0, 1;
    }
    const Eigen::HouseholderQR<Eigen::Matrix<double, 6, 4>> qr(basis);
    const Eigen::Matrix<double, 6, 4> q = qr.householderQ() * Eigen::Matrix<double, 6, 4>::Identity();
    return Eigen::Matrix<double, 6, 6>::Identity() - q * q.transpose();
}

Eigen::Matrix<double, 3, 2> corners(const Eigen::MatrixX2d& pos, const Eigen::MatrixX3i& tris, int t)
{
    Eigen::Matrix<double, 3, 2> c;
    for (int i = 0; i < 3; ++i)
        c.row(i) = pos.row(tris(t, i));
    return c;
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

// Solves min x^T A x over the free entries with the fixed ones held, where A
// is assembled over `dims` interleaved coordinates per vertex; rhs is the
// linear term b in x^T A x - 2 b^T x.
Eigen::MatrixXd solve_free(const Eigen::SparseMatrix<double>& a, const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& x,
                           const std::vector<char>& fixed_var)
{
    const Eigen::Index n = a.rows();
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    int free_count = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed_var[static_cast<std::size_t>(i)])
            slot[static_cast<std::size_t>(i)] = free_count++;
    if (free_count == 0)
        return x;
    Triplets ff;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(free_count, rhs.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        if (slot[static_cast<std::size_t>(i)] >= 0)
            b.row(slot[static_cast<std::size_t>(i)]) = rhs.row(i);
    for (int k = 0; k < a.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
            const int r = slot[static_cast<std::size_t>(it.row())];
            const int c = slot[static_cast<std::size_t>(it.col())];
            if (r < 0)
                continue;
            if (c >= 0)
                ff.emplace_back(r, c, it.value());
            else
                b.row(r) -= it.value() * x.row(it.col());
        }
    }
    Eigen::SparseMatrix<double> aff(free_count, free_count);
    aff.setFromTriplets(ff.begin(), ff.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(aff);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "warp system is singular (too few fixed vertices?)");
    const Eigen::MatrixXd sol = ldlt.solve(b);
    if (ldlt.info() != Eigen::Success || !sol.allFinite())
        throw Error(ErrorCode::SingularSystem, "warp solve failed");
    Eigen::MatrixXd out = x;
    for (Eigen::Index i = 0; i < n; ++i)
        if (slot[static_cast<std::size_t>(i)] >= 0)
            out.row(i) = sol.row(slot[static_cast<std::size_t>(i)]);
    return out;
}

void similarity_solve(WarpGrid& grid)
{
    const int n = static_cast<int>(grid.rest.rows());
    Triplets trips;
    trips.reserve(static_cast<std::size_t>(grid.triangles.rows()) * 36);
    for (int t = 0; t < grid.triangles.rows(); ++t) {
        const auto q = similarity_residual(corners(grid.rest, grid.triangles, t));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                trips.emplace_back(2 * grid.triangles(t, i / 2) + i % 2, 2 * grid.triangles(t, j / 2) + j % 2, q(i, j));
    }
    Eigen::SparseMatrix<double> a(2 * n, 2 * n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::MatrixXd x(2 * n, 1);
    std::vector<char> fixed_var(static_cast<std::size_t>(2 * n));
    for (int v = 0; v < n; ++v) {
        x(2 * v, 0) = grid.deformed(v, 0);
        x(2 * v + 1, 0) = grid.deformed(v, 1);
        fixed_var[static_cast<std::size_t>(2 * v)] = fixed_var[static_cast<std::size_t>(2 * v + 1)] = grid.fixed[static_cast<std::size_t>(v)];
    }
    const Eigen::MatrixXd sol = solve_free(a, Eigen::MatrixXd::Zero(2 * n, 1), x, fixed_var);
    for (int v = 0; v < n; ++v)
        grid.deformed.row(v) << sol(2 * v, 0), sol(2 * v + 1, 0);
}

void arap_round(WarpGrid& grid)
{
    const int n = static_cast<int>(grid.rest.rows());
    Triplets trips;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    const Eigen::Matrix3d center = Eigen::Matrix3d::Identity() - Eigen::Matrix3d::Constant(1.0 / 3.0);
    for (int t = 0; t < grid.triangles.rows(); ++t) {
        const Eigen::Matrix<double, 3, 2> p = center * corners(grid.rest, grid.triangles, t);
        const Eigen::Matrix<double, 3, 2> q = center * corners(grid.deformed, grid.triangles, t);
        const Eigen::Matrix2d s = q.transpose() * p;
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
        d(1, 1) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
        const Eigen::Matrix2d r = svd.matrixU() * d * svd.matrixV().transpose();
        const Eigen::Matrix<double, 3, 2> target = p * r.transpose();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(grid.triangles(t, i), grid.triangles(t, j), center(i, j));
            rhs.row(grid.triangles(t, i)) += target.row(i);
        }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    grid.deformed = solve_free(a, rhs, grid.deformed, grid.fixed);
}

} // namespace

WarpGrid WarpGrid::make(int width, int height, double cell)
{
    if (width < 1 || height < 1 || !(cell > 0.0))
        throw Error(ErrorCode::InvalidArgument, "warp grid needs a positive size and cell");
    WarpGrid g;
    g.width = width;
    g.height = height;
    g.cell = cell;
    g.cols = static_cast<int>(std::ceil(width / cell)) + 1;
    g.rows = static_cast<int>(std::ceil(height / cell)) + 1;
    g.rest.resize(g.cols * g.rows, 2);
    for (int j = 0; j < g.rows; ++j)
        for (int i = 0; i < g.cols; ++i)
            g.rest.row(g.index(i, j)) << std::min(i * cell, static_cast<double>(width)),
                std::min(j * cell, static_cast<double>(height));
    g.deformed = g.rest;
    g.fixed.assign(static_cast<std::size_t>(g.cols * g.rows), 0);
    g.triangles.resize(2 * (g.cols - 1) * (g.rows - 1), 3);
    int t = 0;
    for (int j = 0; j + 1 < g.rows; ++j) {
        for (int i = 0; i + 1 < g.cols; ++i) {
            const int v00 = g.index(i, j), v10 = g.index(i + 1, j), v01 = g.index(i, j + 1), v11 = g.index(i + 1, j + 1);
            g.triangles.row(t++) << v00, v10, v11;
            g.triangles.row(t++) << v00, v11, v01;
        }
    }
    return g;
}

bool WarpGrid::on_border(int v) const
{
    const int i = v % cols, j = v / cols;
    return i == 0 || j == 0 || i == cols - 1 || j == rows - 1;
}

void WarpGrid::fix_border()
{
    for (int v = 0; v < cols * rows; ++v)
        if (on_border(v)) {
            fixed[static_cast<std::size_t>(v)] = 1;
            deformed.row(v) = rest.row(v);
        }
}

int bind_constraints(WarpGrid& grid, const std::vector<Eigen::Vector2d>& points,
                     const std::vector<Eigen::Vector2d>& displacements, double radius)
{
    if (points.size() != displacements.size())
        throw Error(ErrorCode::InvalidArgument, "one displacement per constraint point is required");
    const int n = grid.cols * grid.rows;
    Eigen::MatrixX2d sum = Eigen::MatrixX2d::Zero(n, 2);
    std::vector<int> count(static_cast<std::size_t>(n), 0);
    const double r2 = radius * radius;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const Eigen::Vector2d& p = points[k];
        const int i0 = std::max(0, static_cast<int>(std::floor((p.x() - radius) / grid.cell)));
        const int i1 = std::min(grid.cols - 1, static_cast<int>(std::ceil((p.x() + radius) / grid.cell)));
        const int j0 = std::max(0, static_cast<int>(std::floor((p.y() - radius) / grid.cell)));
        const int j1 = std::min(grid.rows - 1, static_cast<int>(std::ceil((p.y() + radius) / grid.cell)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const int v = grid.index(i, j);
                if ((grid.rest.row(v).transpose() - p).squaredNorm() <= r2) {
                    sum.row(v) += displacements[k].transpose();
                    ++count[static_cast<std::size_t>(v)];
                }
            }
    }
    int bound = 0;
    for (int v = 0; v < n; ++v) {
        if (!count[static_cast<std::size_t>(v)] || grid.fixed[static_cast<std::size_t>(v)])
            continue;
        grid.fixed[static_cast<std::size_t>(v)] = 1;
        grid.deformed.row(v) = grid.rest.row(v) + sum.row(v) / count[static_cast<std::size_t>(v)];
        ++bound;
    }
    return bound;
}

void solve_warp(WarpGrid& grid, int arap_iterations)
{
    similarity_solve(grid);
    for (int k = 0; k < arap_iterations; ++k)
        arap_round(grid);
}

double warp_energy(const WarpGrid& grid)
{
    double e = 0.0;
    for (int t = 0; t < grid.triangles.rows(); ++t) {
        const auto q = similarity_residual(corners(grid.rest, grid.triangles, t));
        const auto d = corners(grid.deformed, grid.triangles, t);
        Eigen::Matrix<double, 6, 1> x;
        x << d(0, 0), d(0, 1), d(1, 0), d(1, 1), d(2, 0), d(2, 1);
        e += x.dot(q * x);
    }
    return e;
}

int inverted_triangles(const WarpGrid& grid)
{
    int bad = 0;
    for (int t = 0; t < grid.triangles.rows(); ++t) {
        const auto r = corners(grid.rest, grid.triangles, t);
        const auto d = corners(grid.deformed, grid.triangles, t);
        const double a0 = cross2(r.row(1) - r.row(0), r.row(2) - r.row(0));
        const double a1 = cross2(d.row(1) - d.row(0), d.row(2) - d.row(0));
        if (a0 * a1 <= 0.0)
            ++bad;
    }
    return bad;
}

Raster resample_warp(const Raster& image, const WarpGrid& grid, int x0, int y0)
{
    if (x0 < 0 || y0 < 0 || x0 + grid.width > image.width || y0 + grid.height > image.height)
        throw Error(ErrorCode::InvalidArgument, "warp grid window does not fit the image");
    Raster out = image;
    const int w = grid.width, h = grid.height;
    const std::size_t ch = static_cast<std::size_t>(image.channels);
    std::vector<float> px(ch);
    for (int t = 0; t < grid.triangles.rows(); ++t) {
        const auto r = corners(grid.rest, grid.triangles, t);
        const auto d = corners(grid.deformed, grid.triangles, t);
        const Eigen::Vector2d a = d.row(0), b = d.row(1), c = d.row(2);
        const double area2 = cross2(b - a, c - a);
        if (std::abs(area2) < 1e-12)
            continue;
        const int xa = std::max(0, static_cast<int>(std::floor(d.col(0).minCoeff() - 0.5)));
        const int xb = std::min(w - 1, static_cast<int>(std::ceil(d.col(0).maxCoeff() - 0.5)));
        const int ya = std::max(0, static_cast<int>(std::floor(d.col(1).minCoeff() - 0.5)));
        const int yb = std::min(h - 1, static_cast<int>(std::ceil(d.col(1).maxCoeff() - 0.5)));
        for (int y = ya; y <= yb; ++y)
            for (int x = xa; x <= xb; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double w0 = cross2(c - b, p - b) / area2;
                const double w1 = cross2(a - c, p - c) / area2;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9)
                    continue;
                const Eigen::Vector2d src = w0 * r.row(0).transpose() + w1 * r.row(1).transpose() + w2 * r.row(2).transpose();
                sample_bilinear(image, x0 + std::clamp(src.x(), 0.0, static_cast<double>(w)),
                                y0 + std::clamp(src.y(), 0.0, static_cast<double>(h)), px.data());
                std::copy(px.begin(), px.end(), out.data.begin() + static_cast<std::ptrdiff_t>(out.index(x + x0, y + y0) * ch));
            }
    }
    return out;
}

WarpResult warp_background(const Raster& image, const FaceMesh& mesh_src, const FaceMesh& mesh_dst,
                           const Camera& camera, const WarpOptions& options)
{
    if (mesh_src.topology_id() != mesh_dst.topology_id())
        throw Error(ErrorCode::TopologyMismatch, "source and target meshes must share one topology");
    camera.validate();
    WarpResult result;
    result.grid = WarpGrid::make(image.width, image.height, options.cell);
    result.grid.fix_border();

    const Eigen::MatrixX3d normals = camera_normals(mesh_src, camera);
    std::vector<Eigen::Vector2d> points, disp;
    bool moved = false;
    for (int v = 0; v < mesh_src.vertex_count(); ++v) {
        if (normals(v, 2) >= 0.0)
            continue;
        const Eigen::Vector2d p = camera.project(mesh_src.vertices.row(v).transpose());
        const Eigen::Vector2d q = camera.project(mesh_dst.vertices.row(v).transpose());
        points.push_back(p);
        disp.push_back(q - p);
        moved = moved || q != p;
    }
    if (!moved) {
        result.image = image;
        return result;
    }
    result.constrained = bind_constraints(result.grid, points, disp, options.bind_radius_cells * options.cell);
    solve_warp(result.grid, options.arap_iterations);
    result.inverted = inverted_triangles(result.grid);
    result.image = resample_warp(image, result.grid);
    return result;
}

} // namespace caric
