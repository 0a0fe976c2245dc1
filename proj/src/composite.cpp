#include "caric/composite.hpp"

#include "caric/error.hpp"
#include "caric/image_ops.hpp"
#include "caric/maxflow.hpp"
#include "caric/sketch.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>

namespace caric {

namespace {

constexpr int kDx[4] = {-1, 1, 0, 0};
constexpr int kDy[4] = {0, 0, -1, 1};

void require_same_size(const Mask& m, int w, int h, const char* what)
{
    if (m.width != w || m.height != h)
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " size does not match the image");
}

} // namespace

Raster color_difference(const Raster& fg, const Raster& bg)
{
    if (!fg.same_shape(bg))
        throw Error(ErrorCode::InvalidArgument, "foreground and background shapes differ");
    Raster d(fg.width, fg.height, 1);
    const std::size_t ch = static_cast<std::size_t>(fg.channels);
    for (std::size_t p = 0; p < fg.pixel_count(); ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < ch; ++c) {
            const double e = fg.data[p * ch + c] - bg.data[p * ch + c];
            s += e * e;
        }
        d.data[p] = static_cast<float>(std::sqrt(s));
    }
    return d;
}

double seam_cost(const Mask& labels, const Mask& band, const Raster& difference)
{
    double cost = 0.0;
    for (int y = 0; y < band.height; ++y)
        for (int x = 0; x < band.width; ++x) {
            if (!band(x, y))
                continue;
            // right and down neighbours only, so each pair counts once
            if (x + 1 < band.width && band(x + 1, y) && labels(x, y) != labels(x + 1, y))
                cost += static_cast<double>(difference.at(x, y)) + difference.at(x + 1, y);
            if (y + 1 < band.height && band(x, y + 1) && labels(x, y) != labels(x, y + 1))
                cost += static_cast<double>(difference.at(x, y)) + difference.at(x, y + 1);
        }
    return cost;
}

void seam_band(const Mask& fg_mask, int band_width, Mask& band, Mask& inner_ring, Mask& outer_ring)
{
    if (band_width < 1)
        throw Error(ErrorCode::InvalidArgument, "seam band width must be at least 1 px");
    const int w = fg_mask.width, h = fg_mask.height;
    const Mask interior = erode(fg_mask, band_width);
    band = Mask(w, h);
    inner_ring = Mask(w, h);
    outer_ring = Mask(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!fg_mask(x, y) || interior(x, y))
                continue;
            band.set(x, y, true);
            bool in = false, out = false;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx[k], ny = y + kDy[k];
                if (!fg_mask.inside(nx, ny) || !fg_mask(nx, ny))
                    out = true;
                else if (interior(nx, ny))
                    in = true;
            }
            // a pixel touching both sides has to stay with the foreground
            inner_ring.set(x, y, in);
            outer_ring.set(x, y, out && !in);
        }
}

SeamResult seam_cut(const Raster& fg, const Mask& fg_mask, const Raster& bg, const SeamOptions& options)
{
    require_same_size(fg_mask, fg.width, fg.height, "foreground mask");
    if (!fg_mask.any())
        throw Error(ErrorCode::InvalidArgument, "foreground mask is empty");
    const Raster diff = color_difference(fg, bg);
    const int w = fg.width, h = fg.height;

    SeamResult result;
    Mask inner, outer;
    seam_band(fg_mask, options.band, result.band, inner, outer);
    const Mask interior = erode(fg_mask, options.band);

    std::vector<int> id(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
    int nodes = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (result.band(x, y))
                id[static_cast<std::size_t>(y * w + x)] = nodes++;

    MaxFlow graph(nodes);
    double total = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int a = id[static_cast<std::size_t>(y * w + x)];
            if (a < 0)
                continue;
            for (int k = 1; k < 4; k += 2) { // right, down
                const int nx = x + (k == 1 ? 1 : 0), ny = y + (k == 3 ? 1 : 0);
                if (nx >= w || ny >= h)
                    continue;
                const int b = id[static_cast<std::size_t>(ny * w + nx)];
                if (b < 0)
                    continue;
                const double c = static_cast<double>(diff.at(x, y)) + diff.at(nx, ny);
                graph.add_edge(a, b, c, c);
                total += c;
            }
        }
    const double hard = 2.0 * total + 1.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int a = id[static_cast<std::size_t>(y * w + x)];
            if (a < 0)
                continue;
            if (inner(x, y))
                graph.add_terminal(a, hard, 0.0);
            else if (outer(x, y))
                graph.add_terminal(a, 0.0, hard);
        }
    graph.solve();

    result.labels = Mask(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int a = id[static_cast<std::size_t>(y * w + x)];
            result.labels.set(x, y, interior(x, y) || (a >= 0 && graph.source_side(a)));
        }
    result.cost = seam_cost(result.labels, result.band, diff);
    result.blend_mask = result.labels;
    return result;
}

SeamResult seam_cut(const RenderOutput& fg, const Raster& bg, const SeamOptions& options)
{
    // Eye and mouth holes belong to the face; they are refilled later.
    return seam_cut(fg.color, mask_or(fg.mask, fg.excluded), bg, options);
}

Raster poisson_solve(const Raster& guidance, const Raster& boundary, const Mask& region, const PoissonOptions& options,
                     PoissonStats* stats)
{
    if (!guidance.same_shape(boundary))
        throw Error(ErrorCode::InvalidArgument, "guidance and boundary shapes differ");
    const int w = boundary.width, h = boundary.height;
    require_same_size(region, w, h, "Poisson region");

    std::vector<int> id(boundary.pixel_count(), -1);
    int n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (region(x, y))
                id[static_cast<std::size_t>(y * w + x)] = n++;
    if (stats)
        *stats = PoissonStats{0, 0.0, static_cast<std::size_t>(n)};
    if (n == 0)
        return boundary;

    // Every connected piece of the region needs a Dirichlet neighbour.
    {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        for (int start = 0; start < w * h; ++start) {
            const int s = id[static_cast<std::size_t>(start)];
            if (s < 0 || seen[static_cast<std::size_t>(s)])
                continue;
            bool anchored = false;
            std::deque<int> queue{start};
            seen[static_cast<std::size_t>(s)] = 1;
            while (!queue.empty()) {
                const int p = queue.front();
                queue.pop_front();
                const int x = p % w, y = p / w;
                for (int k = 0; k < 4; ++k) {
                    const int nx = x + kDx[k], ny = y + kDy[k];
                    if (!region.inside(nx, ny))
                        continue;
                    const int q = id[static_cast<std::size_t>(ny * w + nx)];
                    if (q < 0) {
                        anchored = true;
                    } else if (!seen[static_cast<std::size_t>(q)]) {
                        seen[static_cast<std::size_t>(q)] = 1;
                        queue.push_back(ny * w + nx);
                    }
                }
            }
            if (!anchored)
                throw Error(ErrorCode::SingularSystem, "Poisson region has a component without boundary pixels");
        }
    }

    const int ch = boundary.channels;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 5);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, ch);
    Eigen::MatrixXd guess(n, ch);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(ch);
    int offset_count = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int i = id[static_cast<std::size_t>(y * w + x)];
            if (i < 0)
                continue;
            int degree = 0;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx[k], ny = y + kDy[k];
                if (!region.inside(nx, ny))
                    continue;
                ++degree;
                const bool guided = guidance.valid(x, y) && guidance.valid(nx, ny);
                const int j = id[static_cast<std::size_t>(ny * w + nx)];
                for (int c = 0; c < ch; ++c) {
                    if (guided)
                        rhs(i, c) += static_cast<double>(guidance.at(x, y, c)) - guidance.at(nx, ny, c);
                    if (j < 0) {
                        rhs(i, c) += boundary.at(nx, ny, c);
                        offset(c) += static_cast<double>(boundary.at(nx, ny, c)) - guidance.at(nx, ny, c);
                    }
                }
                if (j >= 0)
                    trips.emplace_back(i, j, -1.0);
                else
                    ++offset_count;
            }
            trips.emplace_back(i, i, static_cast<double>(degree));
            for (int c = 0; c < ch; ++c)
                guess(i, c) = guidance.at(x, y, c);
        }
    if (offset_count > 0)
        offset /= offset_count;

    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseMatrix<double> lower = a.triangularView<Eigen::Lower>();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    if (options.direct) {
        ldlt.compute(lower);
        if (ldlt.info() != Eigen::Success)
            throw Error(ErrorCode::SingularSystem, "Poisson system factorization failed");
    } else {
        cg.setTolerance(options.tolerance);
        cg.setMaxIterations(options.max_iterations);
        cg.compute(a);
    }

    Raster out = boundary;
    for (int c = 0; c < ch; ++c) {
        Eigen::VectorXd sol;
        if (options.direct) {
            sol = ldlt.solve(rhs.col(c));
        } else {
            const Eigen::VectorXd x0 = guess.col(c).array() + offset(c);
            sol = cg.solveWithGuess(rhs.col(c), x0);
        }
        const double rel = rhs.col(c).norm() > 0.0 ? (rhs.col(c) - a * sol).norm() / rhs.col(c).norm()
                                                   : (options.direct ? sol.norm() : cg.error());
        if (stats) {
            stats->iterations = std::max(stats->iterations, options.direct ? 1 : static_cast<int>(cg.iterations()));
            stats->relative_residual = std::max(stats->relative_residual, rel);
        }
        if ((!options.direct && cg.info() != Eigen::Success) || !sol.allFinite() || !(rel <= options.tolerance))
            throw Error(ErrorCode::NonConvergence,
                        "Poisson solve did not converge (relative residual " + std::to_string(rel) + ")");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int i = id[static_cast<std::size_t>(y * w + x)];
                if (i >= 0)
                    out.at(x, y, c) = static_cast<float>(sol(i));
            }
    }
    return out;
}

Raster poisson_blend(const Raster& fg, const Raster& bg, const SeamResult& seam, const PoissonOptions& options,
                     PoissonStats* stats)
{
    require_same_size(seam.blend_mask, bg.width, bg.height, "seam");
    return poisson_solve(fg, bg, seam.blend_mask, options, stats);
}

Raster warp_window(const Raster& image, int x0, int y0, int width, int height, const std::vector<Eigen::Vector2d>& points,
                   const std::vector<Eigen::Vector2d>& displacements, double cell, double radius)
{
    if (points.size() != displacements.size())
        throw Error(ErrorCode::InvalidArgument, "one displacement per constraint point is required");
    const int xa = std::max(0, x0), ya = std::max(0, y0);
    const int xb = std::min(image.width, x0 + width), yb = std::min(image.height, y0 + height);
    if (xb - xa < 2 || yb - ya < 2)
        return image;
    bool moved = false;
    for (const auto& d : displacements)
        moved = moved || d.squaredNorm() > 0.0;
    if (!moved)
        return image;

    WarpGrid grid = WarpGrid::make(xb - xa, yb - ya, cell);
    grid.fix_border();
    std::vector<Eigen::Vector2d> local;
    local.reserve(points.size());
    for (const auto& p : points)
        local.emplace_back(p.x() - xa, p.y() - ya);
    if (bind_constraints(grid, local, displacements, radius) == 0)
        return image;
    solve_warp(grid);
    return resample_warp(image, grid, xa, ya);
}

Raster fill_interior(const Raster& composite, const Raster& source, const Mask& target_mask,
                     const std::vector<Eigen::Vector2d>& source_points, const std::vector<Eigen::Vector2d>& target_points,
                     const FillOptions& options)
{
    if (!composite.same_shape(source))
        throw Error(ErrorCode::InvalidArgument, "composite and fill source shapes differ");
    require_same_size(target_mask, composite.width, composite.height, "fill mask");
    if (source_points.size() != target_points.size())
        throw Error(ErrorCode::InvalidArgument, "fill correspondences differ in count");
    if (!target_mask.any())
        return composite;

    int x0 = composite.width, y0 = composite.height, x1 = -1, y1 = -1;
    for (int y = 0; y < target_mask.height; ++y)
        for (int x = 0; x < target_mask.width; ++x)
            if (target_mask(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    std::vector<Eigen::Vector2d> disp;
    for (std::size_t k = 0; k < source_points.size(); ++k) {
        disp.push_back(target_points[k] - source_points[k]);
        for (const auto& p : {source_points[k], target_points[k]}) {
            x0 = std::min(x0, static_cast<int>(std::floor(p.x())));
            x1 = std::max(x1, static_cast<int>(std::ceil(p.x())));
            y0 = std::min(y0, static_cast<int>(std::floor(p.y())));
            y1 = std::max(y1, static_cast<int>(std::ceil(p.y())));
        }
    }
    const int margin = static_cast<int>(std::ceil(options.margin_cells * options.cell));
    const Raster warped = warp_window(source, x0 - margin, y0 - margin, x1 - x0 + 1 + 2 * margin,
                                      y1 - y0 + 1 + 2 * margin, source_points, disp, options.cell, options.cell);
    if (options.blend)
        return poisson_solve(warped, composite, target_mask);
    Raster out = composite;
    const std::size_t ch = static_cast<std::size_t>(out.channels);
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        if (target_mask.data[p])
            std::copy_n(warped.data.begin() + static_cast<std::ptrdiff_t>(p * ch), ch,
                        out.data.begin() + static_cast<std::ptrdiff_t>(p * ch));
    return out;
}

Raster ear_edit(const Raster& composite, const std::vector<Eigen::Vector2d>& boundary_curve,
                const std::vector<Eigen::Vector2d>& redrawn, const EarEditOptions& options)
{
    if (boundary_curve.size() < 2 || redrawn.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "ear curves need at least two points");
    SketchCurve a{"ear", boundary_curve, arc_length_params(boundary_curve), false};
    SketchCurve b{"ear", redrawn, arc_length_params(redrawn), false};
    const double la = a.length(), lb = b.length();
    if (!(la > 1e-9) || !(lb > 1e-9) || std::max(la, lb) > options.max_length_ratio * std::min(la, lb))
        throw Error(ErrorCode::InvalidArgument, "ear curves differ too much in length");

    const auto pa = resample(a, options.stations);
    const auto pb = resample(b, options.stations);
    std::vector<Eigen::Vector2d> disp;
    Eigen::Vector2d lo = pa.front(), hi = pa.front();
    for (std::size_t k = 0; k < pa.size(); ++k) {
        disp.push_back(pb[k] - pa[k]);
        lo = lo.cwiseMin(pa[k]).cwiseMin(pb[k]);
        hi = hi.cwiseMax(pa[k]).cwiseMax(pb[k]);
    }
    // Window: the bounding box grown by half its size on every side, and by
    // at least two cells so thin curves still get a free interior.
    const Eigen::Vector2d pad =
        ((hi - lo) * 0.5).cwiseMax(Eigen::Vector2d::Constant(2.0 * options.cell));
    const Eigen::Vector2d wlo = lo - pad, whi = hi + pad;
    const int x0 = static_cast<int>(std::floor(wlo.x())), y0 = static_cast<int>(std::floor(wlo.y()));
    const int x1 = static_cast<int>(std::ceil(whi.x())), y1 = static_cast<int>(std::ceil(whi.y()));
    return warp_window(composite, x0, y0, x1 - x0, y1 - y0, pa, disp, options.cell, options.cell);
}

} // namespace caric
