#include <doctest.h>

#include "caric/composite.hpp"
#include "caric/error.hpp"
#include "caric/exaggeration.hpp"
#include "caric/image_ops.hpp"
#include "caric/lambda_field.hpp"
#include "caric/maxflow.hpp"
#include "caric/relight.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <random>

using namespace caric;

namespace {

Mask random_blob(std::mt19937_64& rng, int w, int h)
{
    // union of a few discs, kept off the image edge
    Mask m(w, h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int discs = 1 + static_cast<int>(u(rng) * 3);
    for (int k = 0; k < discs; ++k) {
        const double cx = w * (0.3 + 0.4 * u(rng)), cy = h * (0.3 + 0.4 * u(rng));
        const double r = std::min(w, h) * (0.15 + 0.2 * u(rng));
        for (int y = 1; y + 1 < h; ++y)
            for (int x = 1; x + 1 < w; ++x)
                if ((x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r)
                    m.set(x, y, true);
    }
    return m;
}

Raster random_image(std::mt19937_64& rng, int w, int h, int ch = 3)
{
    Raster r(w, h, ch);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : r.data)
        v = u(rng);
    return r;
}

// Builds the cut problem from scratch (band pixels + two terminals) for the
// Edmonds-Karp oracle.
double oracle_cut(const Mask& band, const Mask& inner, const Mask& outer, const Raster& diff)
{
    const int w = band.width, h = band.height;
    std::vector<int> id(static_cast<std::size_t>(w * h), -1);
    int n = 0;
    for (int i = 0; i < w * h; ++i)
        if (band.data[static_cast<std::size_t>(i)])
            id[static_cast<std::size_t>(i)] = n++;
    const int s = n, t = n + 1;
    std::vector<oracle::FlowEdge> edges;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int a = id[static_cast<std::size_t>(y * w + x)];
            if (a < 0)
                continue;
            if (inner(x, y))
                edges.push_back({s, a, 1e9});
            if (outer(x, y))
                edges.push_back({a, t, 1e9});
            const int nx[2] = {x + 1, x}, ny[2] = {y, y + 1};
            for (int k = 0; k < 2; ++k) {
                if (nx[k] >= w || ny[k] >= h)
                    continue;
                const int b = id[static_cast<std::size_t>(ny[k] * w + nx[k])];
                if (b < 0)
                    continue;
                const double c = static_cast<double>(diff.at(x, y)) + diff.at(nx[k], ny[k]);
                edges.push_back({a, b, c});
                edges.push_back({b, a, c});
            }
        }
    return oracle::edmonds_karp(n + 2, edges, s, t);
}

std::vector<std::vector<double>> channel_grid(const Raster& r, int c)
{
    std::vector<std::vector<double>> g(static_cast<std::size_t>(r.height), std::vector<double>(static_cast<std::size_t>(r.width)));
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            g[y][x] = r.at(x, y, c);
    return g;
}

std::vector<std::vector<char>> mask_grid(const Mask& m)
{
    std::vector<std::vector<char>> g(static_cast<std::size_t>(m.height), std::vector<char>(static_cast<std::size_t>(m.width)));
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            g[y][x] = m(x, y);
    return g;
}

Mask disc(int w, int h, double cx, double cy, double r)
{
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.set(x, y, (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r);
    return m;
}

// Hemisphere of normals facing the camera (z < 0) inside a disc.
Raster sphere_normals(int size, Mask& region)
{
    Raster n(size, size, 3);
    region = Mask(size, size);
    const double c = size / 2.0, r = size / 2.0 - 1.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5 - c) / r, v = (y + 0.5 - c) / r;
            if (u * u + v * v >= 0.95)
                continue;
            region.set(x, y, true);
            n.at(x, y, 0) = static_cast<float>(u);
            n.at(x, y, 1) = static_cast<float>(v);
            n.at(x, y, 2) = static_cast<float>(-std::sqrt(1.0 - u * u - v * v));
        }
    return n;
}

RenderOutput synthetic_render(int w, int h)
{
    RenderOutput r;
    r.color = Raster(w, h, 3, 0.5f);
    r.mask = Mask(w, h, true);
    r.excluded = Mask(w, h);
    r.normals_before = Raster(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            r.normals_before.at(x, y, 2) = -1.0f;
    r.normals_after = r.normals_before;
    return r;
}

FaceMesh face(int grid = 32)
{
    FaceShapeParams p;
    p.rows = grid;
    p.cols = grid;
    return make_face_mesh(p);
}

} // namespace

TEST_CASE("max flow matches Edmonds-Karp on random graphs")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(u(rng) * 25);
        MaxFlow mf(n);
        std::vector<oracle::FlowEdge> edges;
        for (int i = 0; i < n; ++i) {
            const double sc = u(rng) < 0.3 ? u(rng) * 5 : 0.0, tc = u(rng) < 0.3 ? u(rng) * 5 : 0.0;
            mf.add_terminal(i, sc, tc);
            edges.push_back({n, i, sc});
            edges.push_back({i, n + 1, tc});
        }
        const int m = static_cast<int>(u(rng) * 4 * n);
        for (int k = 0; k < m; ++k) {
            const int a = static_cast<int>(u(rng) * n), b = static_cast<int>(u(rng) * n);
            if (a == b)
                continue;
            const double c1 = u(rng) * 3, c2 = u(rng) < 0.5 ? 0.0 : u(rng) * 3;
            mf.add_edge(a, b, c1, c2);
            edges.push_back({a, b, c1});
            edges.push_back({b, a, c2});
        }
        const double expected = oracle::edmonds_karp(n + 2, edges, n, n + 1);
        const double got = mf.solve();
        CHECK(got == doctest::Approx(expected).epsilon(1e-9));
        // The labelling is a cut of exactly the flow value.
        double cut = 0.0;
        for (const auto& e : edges) {
            const bool sa = e.a == n || (e.a < n && mf.source_side(e.a));
            const bool sb = e.b == n || (e.b < n && mf.source_side(e.b));
            if (sa && !sb)
                cut += e.cap;
        }
        CHECK(cut == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("seam cut equals the brute-force min cut on random bands")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 12 + static_cast<int>(rng() % 13), h = 12 + static_cast<int>(rng() % 13);
        const Mask mask = random_blob(rng, w, h);
        if (!mask.any())
            continue;
        const Raster fg = random_image(rng, w, h), bg = random_image(rng, w, h);
        SeamOptions opts;
        opts.band = 2 + static_cast<int>(rng() % 3);
        const SeamResult seam = seam_cut(fg, mask, bg, opts);
        Mask band, inner, outer;
        seam_band(mask, opts.band, band, inner, outer);
        const Raster diff = color_difference(fg, bg);
        const double expected = oracle_cut(band, inner, outer, diff);
        if (inner.any()) {
            CHECK(seam.cost == doctest::Approx(expected).epsilon(1e-9));
        }
        const Mask interior = erode(mask, opts.band);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (interior(x, y) || inner(x, y))
                    CHECK(seam.labels(x, y));
                if (!mask(x, y) || outer(x, y))
                    CHECK_FALSE(seam.labels(x, y));
            }
        // Cutting right outside the inner ring is feasible, so never cheaper.
        CHECK(seam.cost <= seam_cost(mask_or(interior, inner), band, diff) + 1e-9);
    }
}

TEST_CASE("seam cut matches exhaustive enumeration on tiny bands")
{
    std::mt19937_64 rng(8);
    int checked = 0;
    for (int trial = 0; trial < 400 && checked < 25; ++trial) {
        const Mask mask = random_blob(rng, 10, 10);
        Mask band, inner, outer;
        seam_band(mask, 2, band, inner, outer);
        std::vector<std::pair<int, int>> free;
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 10; ++x)
                if (band(x, y) && !inner(x, y) && !outer(x, y))
                    free.emplace_back(x, y);
        if (!inner.any() || free.empty() || free.size() > 14)
            continue;
        const Raster fg = random_image(rng, 10, 10), bg = random_image(rng, 10, 10);
        const Raster diff = color_difference(fg, bg);
        Mask labels = mask_or(erode(mask, 2), inner);
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t bits = 0; bits < (1u << free.size()); ++bits) {
            for (std::size_t k = 0; k < free.size(); ++k)
                labels.set(free[k].first, free[k].second, (bits >> k) & 1u);
            best = std::min(best, seam_cost(labels, band, diff));
        }
        CHECK(seam_cut(fg, mask, bg, SeamOptions{2}).cost == doctest::Approx(best).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("seam cut with identical layers or a zero-difference ring costs nothing")
{
    std::mt19937_64 rng(2);
    const Raster img = random_image(rng, 40, 40);
    const Mask mask = disc(40, 40, 20, 20, 15);
    CHECK(seam_cut(img, mask, img).cost == 0.0);

    // Differences everywhere except on one closed ring inside the band.
    Raster fg = random_image(rng, 40, 40), bg = random_image(rng, 40, 40);
    const Mask ring = mask_and(disc(40, 40, 20, 20, 11), mask_not(disc(40, 40, 20, 20, 9)));
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            if (ring(x, y))
                for (int c = 0; c < 3; ++c)
                    fg.at(x, y, c) = bg.at(x, y, c);
    const SeamResult seam = seam_cut(fg, mask, bg, SeamOptions{8});
    Mask band, inner, outer;
    seam_band(mask, 8, band, inner, outer);
    CHECK(oracle_cut(band, inner, outer, color_difference(fg, bg)) == doctest::Approx(0.0));
    CHECK(seam.cost == doctest::Approx(0.0));
    // Every label change happens between two ring pixels.
    for (int y = 0; y + 1 < 40; ++y)
        for (int x = 0; x + 1 < 40; ++x) {
            if (seam.labels(x, y) != seam.labels(x + 1, y))
                CHECK((ring(x, y) && ring(x + 1, y)));
            if (seam.labels(x, y) != seam.labels(x, y + 1))
                CHECK((ring(x, y) && ring(x, y + 1)));
        }
}

TEST_CASE("poisson solve matches a dense solve")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 4; ++trial) {
        const Raster g = random_image(rng, 32, 32, 2), b = random_image(rng, 32, 32, 2);
        // Region touches the image edge on some trials (natural boundary there).
        Mask region = random_blob(rng, 32, 32);
        if (trial % 2)
            for (int y = 10; y < 20; ++y)
                region.set(0, y, true), region.set(1, y, true);
        PoissonStats stats;
        const Raster out = poisson_solve(g, b, region, PoissonOptions{trial < 2, 1e-10, 20000}, &stats); // both solvers
        CHECK(stats.unknowns == region.count());
        for (int c = 0; c < 2; ++c) {
            std::vector<std::pair<int, int>> px;
            const Eigen::VectorXd ref = oracle::dense_poisson(channel_grid(g, c), channel_grid(b, c), mask_grid(region), px);
            double err = 0.0;
            for (std::size_t i = 0; i < px.size(); ++i)
                err = std::max(err, std::abs(out.at(px[i].first, px[i].second, c) - ref(static_cast<Eigen::Index>(i))));
            CHECK(err < 1e-4);
        }
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (!region(x, y))
                    CHECK(out.at(x, y, 0) == b.at(x, y, 0));
    }
}

TEST_CASE("poisson blend absorbs constant offsets and keeps the seam continuous")
{
    std::mt19937_64 rng(9);
    const Raster bg = procedural_texture(96, 96, 3, Eigen::Vector3d(0.4, 0.4, 0.4), 0.3, 16.0);
    const Mask mask = disc(96, 96, 48, 48, 36);
    {
        const SeamResult seam = seam_cut(bg, mask, bg);
        const Raster out = poisson_blend(bg, bg, seam);
        double err = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            err = std::max(err, static_cast<double>(std::abs(out.data[i] - bg.data[i])));
        CHECK(err < 1e-4);
    }
    {
        Raster fg = bg;
        for (float& v : fg.data)
            v += 0.2f;
        const SeamResult seam = seam_cut(fg, mask, bg);
        CHECK(seam.labels.any());
        const Raster out = poisson_blend(fg, bg, seam);
        double err = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            err = std::max(err, static_cast<double>(std::abs(out.data[i] - bg.data[i])));
        CHECK(err < 1e-4);
    }
    {
        // Slowly varying offset: jumps across the seam stay close to the
        // background's own, unlike a direct paste.
        Raster fg = bg;
        for (int y = 0; y < 96; ++y)
            for (int x = 0; x < 96; ++x)
                for (int c = 0; c < 3; ++c)
                    fg.at(x, y, c) += static_cast<float>(0.3 + 0.1 * std::sin(x / 15.0) * std::cos(y / 20.0));
        const SeamResult seam = seam_cut(fg, mask, bg);
        PoissonStats stats;
        const Raster out = poisson_blend(fg, bg, seam, {}, &stats);
        CHECK(stats.relative_residual < 1e-4);
        double jump_out = 0.0, jump_bg = 0.0, jump_paste = 0.0;
        for (int y = 0; y + 1 < 96; ++y)
            for (int x = 0; x + 1 < 96; ++x)
                for (const auto& [nx, ny] : {std::pair{x + 1, y}, std::pair{x, y + 1}}) {
                    if (seam.labels(x, y) == seam.labels(nx, ny))
                        continue;
                    for (int c = 0; c < 3; ++c) {
                        jump_out = std::max(jump_out, static_cast<double>(std::abs(out.at(x, y, c) - out.at(nx, ny, c))));
                        jump_bg = std::max(jump_bg, static_cast<double>(std::abs(bg.at(x, y, c) - bg.at(nx, ny, c))));
                        const float a = seam.labels(x, y) ? fg.at(x, y, c) : bg.at(x, y, c);
                        const float b = seam.labels(nx, ny) ? fg.at(nx, ny, c) : bg.at(nx, ny, c);
                        jump_paste = std::max(jump_paste, static_cast<double>(std::abs(a - b)));
                    }
                }
        CHECK(jump_out <= jump_bg + 0.02);
        CHECK(jump_paste > jump_bg + 0.2);
        // Inside, the output follows the foreground gradients.
        const Mask inside = erode(seam.labels, 2);
        double grad_err = 0.0;
        for (int y = 0; y < 95; ++y)
            for (int x = 0; x < 95; ++x)
                if (inside(x, y) && inside(x + 1, y))
                    grad_err = std::max(grad_err, std::abs(static_cast<double>(out.at(x + 1, y) - out.at(x, y)) -
                                                           (fg.at(x + 1, y) - fg.at(x, y))));
        CHECK(grad_err < 0.02);
    }
    // A region with no Dirichlet neighbour is rejected.
    const Raster a(8, 8, 1, 0.5f);
    CHECK_THROWS_AS(poisson_solve(a, a, Mask(8, 8, true)), Error);
}

TEST_CASE("interior fill copies, and lands offset content on the target boundary")
{
    const Raster src = procedural_texture(128, 128, 21, Eigen::Vector3d(0.6, 0.5, 0.4), 0.3, 12.0);
    const Mask hole = disc(128, 128, 64, 64, 12);
    std::vector<Eigen::Vector2d> ring;
    for (int k = 0; k < 24; ++k)
        ring.emplace_back(64 + 14 * std::cos(k * 2 * M_PI / 24), 64 + 14 * std::sin(k * 2 * M_PI / 24));

    Raster composite = src;
    for (std::size_t p = 0; p < composite.pixel_count(); ++p)
        if (hole.data[p])
            for (int c = 0; c < 3; ++c)
                composite.data[p * 3 + static_cast<std::size_t>(c)] = 0.0f;
    const Raster filled = fill_interior(composite, src, hole, ring, ring);
    double err = 0.0;
    for (std::size_t i = 0; i < src.data.size(); ++i)
        err = std::max(err, static_cast<double>(std::abs(filled.data[i] - src.data[i])));
    CHECK(err < 1e-4);
    CHECK(fill_interior(composite, src, Mask(128, 128), ring, ring).data == composite.data);

    // Source: a dark mouth disc at (64, 64). Composite: the same scene moved
    // 3 px right, with the mouth erased.
    Raster scene(128, 128, 3, 0.8f);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            const double r = std::hypot(x + 0.5 - 64, y + 0.5 - 64);
            const float v = static_cast<float>(0.2 + 0.6 * std::clamp((r - 9.0) / 2.0, 0.0, 1.0));
            for (int c = 0; c < 3; ++c)
                scene.at(x, y, c) = v;
        }
    Raster moved(128, 128, 3, 0.8f);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c)
                moved.at(x, y, c) = sample_bilinear(scene, x + 0.5 - 3.0, y + 0.5, c);
    const Mask target = disc(128, 128, 67, 64, 13);
    Raster erased = moved;
    for (std::size_t p = 0; p < erased.pixel_count(); ++p)
        if (target.data[p])
            for (int c = 0; c < 3; ++c)
                erased.data[p * 3 + static_cast<std::size_t>(c)] = 1.0f;
    std::vector<Eigen::Vector2d> src_pts, dst_pts;
    for (int k = 0; k < 32; ++k) {
        const Eigen::Vector2d p(64 + 10 * std::cos(k * 2 * M_PI / 32), 64 + 10 * std::sin(k * 2 * M_PI / 32));
        src_pts.push_back(p);
        dst_pts.push_back(p + Eigen::Vector2d(3, 0));
    }
    const Raster out = fill_interior(erased, scene, target, src_pts, dst_pts);
    // Locate the dark edge along the middle row on both sides.
    auto crossing = [&](int from, int to) {
        const int step = from < to ? 1 : -1;
        for (int x = from; x != to; x += step)
            if (out.at(x, 64) < 0.5f && out.at(x + step, 64) >= 0.5f)
                return x + 0.5 + step * (0.5f - out.at(x, 64)) / (out.at(x + step, 64) - out.at(x, 64));
        return -1.0;
    };
    const double right = crossing(67, 100), left = crossing(67, 30);
    CHECK(std::abs(right - (64 + 3 + 10)) < 1.0);
    CHECK(std::abs(left - (64 + 3 - 10)) < 1.0);
    double mean_err = 0.0;
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        if (target.data[p])
            mean_err += std::abs(out.data[p * 3] - moved.data[p * 3]);
    CHECK(mean_err / static_cast<double>(target.count()) < 0.03);
}

TEST_CASE("ear edit moves the curve and leaves distant pixels alone")
{
    Raster img(200, 240, 3, 0.8f);
    for (int y = 0; y < 240; ++y)
        for (int x = 0; x < 200; ++x) {
            const float v = static_cast<float>(0.8 - 0.6 * std::exp(-std::pow((x + 0.5 - 100.5) / 1.5, 2)));
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = v;
        }
    std::vector<Eigen::Vector2d> curve, redrawn, far;
    for (int k = 0; k <= 40; ++k) {
        curve.emplace_back(100.5, 80 + 2 * k);
        redrawn.emplace_back(105.5, 80 + 2 * k);
        far.emplace_back(100.5 + 0.5 * k, 80 + 2 * k);
    }
    CHECK(ear_edit(img, curve, curve).data == img.data);
    const Raster out = ear_edit(img, curve, redrawn);
    for (int y = 100; y <= 140; y += 4) {
        int best = 0;
        for (int x = 1; x < 200; ++x)
            if (out.at(x, y) < out.at(best, y))
                best = x;
        CHECK(std::abs(best + 0.5 - 105.5) <= 1.0);
    }
    // Outside the window (box of both curves grown by max(half size, 2 cells)).
    for (int y = 0; y < 240; ++y)
        for (int x = 0; x < 200; ++x) {
            const bool inside = x >= 100.5 - 16 - 1 && x <= 105.5 + 16 + 1 && y >= 80 - 40 - 1 && y <= 160 + 40 + 1;
            if (!inside)
                CHECK(out.at(x, y) == img.at(x, y));
        }
    std::vector<Eigen::Vector2d> tiny{{100, 100}, {100, 105}};
    CHECK_THROWS_AS(ear_edit(img, curve, tiny), Error);
    CHECK_NOTHROW(ear_edit(img, curve, far));
}

TEST_CASE("lighting recovers forward-synthesized SH coefficients")
{
    Mask region;
    const Raster normals = sphere_normals(64, region);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 0.3);
    for (int trial = 0; trial < 20; ++trial) {
        SHLighting truth;
        truth.coeffs(0) = 1.0;
        for (int k = 1; k < 9; ++k)
            truth.coeffs(k) = g(rng);
        Raster img(64, 64, 1);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (region(x, y))
                    img.at(x, y) = static_cast<float>(
                        0.5 * truth.eval(Eigen::Vector3d(normals.at(x, y, 0), normals.at(x, y, 1), normals.at(x, y, 2))));
        LightingOptions opts;
        opts.albedo_mean = 0.5;
        const LightingResult r = estimate_lighting(img, normals, region, opts);
        const double rel = (r.light.coeffs - truth.coeffs).norm() / truth.coeffs.norm();
        CHECK_MESSAGE(rel < 0.05, "trial " << trial << " rel " << rel);
        REQUIRE(r.objective.size() == 10u);
        for (std::size_t k = 1; k < r.objective.size(); ++k)
            CHECK(r.objective[k] <= r.objective[k - 1] + 1e-12);
    }
}

TEST_CASE("lighting objective decreases on textured albedo; constant normals give DC only")
{
    Mask region;
    const Raster normals = sphere_normals(48, region);
    const Raster tex = procedural_texture(48, 48, 4, Eigen::Vector3d(0.5, 0.5, 0.5), 0.3, 8.0);
    const SHLighting light = default_lighting();
    Raster img(48, 48, 1);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            img.at(x, y) = static_cast<float>(
                tex.at(x, y, 0) * std::max(0.0, light.eval(Eigen::Vector3d(normals.at(x, y, 0), normals.at(x, y, 1),
                                                                             normals.at(x, y, 2)))));
    const LightingResult r = estimate_lighting(img, normals, region);
    for (std::size_t k = 1; k < r.objective.size(); ++k)
        CHECK(r.objective[k] <= r.objective[k - 1] + 1e-12);
    CHECK(r.light.mean_radiance() > 0.0);
    CHECK(lighting_objective(img, normals, region, r.albedo, r.light, {}) == doctest::Approx(r.objective.back()));

    Raster flat(20, 20, 3);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            flat.at(x, y, 2) = -1.0f;
    const Raster grey(20, 20, 1, 0.4f);
    const LightingResult c = estimate_lighting(grey, flat, Mask(20, 20, true));
    CHECK(c.light.coeffs.tail<8>().norm() < 1e-4 * c.light.coeffs(0));
    CHECK(c.light.eval(Eigen::Vector3d(0, 0, -1)) * 0.4 == doctest::Approx(0.4).epsilon(1e-6));

    CHECK_THROWS_AS(estimate_lighting(grey, flat, disc(20, 20, 10, 10, 4)), Error);
}

TEST_CASE("alpha map: exact ones, Dirichlet edge, dense oracle")
{
    const SHLighting light = default_lighting();
    RenderOutput r = synthetic_render(32, 32);
    const Mask face(32, 32, true);
    AlphaOptions one;
    one.downsample = 1;
    const Raster same = build_alpha(light, r, face, one);
    for (float v : same.data)
        CHECK(v == 1.0f);
    for (float v : build_alpha(light, r, face).data)
        CHECK(v == 1.0f);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const Eigen::Vector3d n = Eigen::Vector3d(g(rng), g(rng), -1.0).normalized();
            for (int c = 0; c < 3; ++c)
                r.normals_after.at(x, y, c) = static_cast<float>(n(c));
        }
    const Raster alpha = build_alpha(light, r, face, one);
    const Raster raw = raw_alpha(light, r, face);
    std::vector<std::vector<double>> d(32, std::vector<double>(32)), zero(32, std::vector<double>(32, 0.0));
    std::vector<std::vector<char>> interior(32, std::vector<char>(32, 0));
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            d[y][x] = raw.at(x, y) - 1.0;
            interior[y][x] = x > 0 && y > 0 && x < 31 && y < 31;
        }
    std::vector<std::pair<int, int>> px;
    const Eigen::VectorXd ref = oracle::dense_poisson(d, zero, interior, px);
    double err = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i)
        err = std::max(err, std::abs(alpha.at(px[i].first, px[i].second) -
                                     std::clamp(1.0 + ref(static_cast<Eigen::Index>(i)), 0.3, 3.0)));
    CHECK(err < 1e-4);
    for (int k = 0; k < 32; ++k) {
        CHECK(alpha.at(k, 0) == 1.0f);
        CHECK(alpha.at(0, k) == 1.0f);
        CHECK(alpha.at(k, 31) == 1.0f);
        CHECK(alpha.at(31, k) == 1.0f);
    }

    // Downsampled version on a disc: 1 on and outside its edge, within bounds.
    const Mask round = disc(32, 32, 16, 16, 13);
    const Raster a4 = build_alpha(light, r, round);
    const Mask edge = mask_boundary(round);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (!round(x, y) || edge(x, y))
                CHECK(a4.at(x, y) == 1.0f);
            CHECK(a4.at(x, y) >= 0.3f);
            CHECK(a4.at(x, y) <= 3.0f);
        }
}

TEST_CASE("alpha mean approaches one along a lambda homotopy")
{
    const FaceMesh mesh = face(32);
    const Camera cam = fit_frontal_camera(mesh, 320, 320);
    const auto ctx = SolverContext::prefactor(mesh);
    const SynthResult style = synth_exaggeration(mesh, 7);
    const Raster photo = procedural_texture(320, 320, 1, Eigen::Vector3d(0.6, 0.5, 0.4));
    const SHLighting light = default_lighting();
    std::vector<double> dev;
    for (double t : {0.0, 0.25, 0.5, 1.0}) {
        LambdaField lt = style.lambda;
        lt.values = (1.0 + t * (style.lambda.values.array() - 1.0)).matrix();
        const FaceMesh dst = t == 0.0 ? mesh : exaggerate(mesh, lt, *ctx);
        // Keep the sampled surface fixed so only the normals change.
        const RenderOutput r = render_textured(dst, dst, cam, photo);
        RenderOutput base = render_textured(mesh, mesh, cam, photo);
        const Mask face_mask = mask_and(r.mask, base.mask);
        base.normals_after = r.normals_after;
        base.mask = face_mask;
        const Raster alpha = build_alpha(light, base, face_mask);
        double sum = 0.0;
        for (std::size_t p = 0; p < alpha.pixel_count(); ++p)
            if (face_mask.data[p])
                sum += alpha.data[p];
        dev.push_back(std::abs(sum / static_cast<double>(face_mask.count()) - 1.0));
    }
    CHECK(dev[0] == 0.0);
    CHECK(dev[1] <= dev[2] + 1e-6);
    CHECK(dev[2] <= dev[3] + 1e-6);
    CHECK(dev[3] > 0.0);
}

TEST_CASE("reshade multiplies and clips")
{
    Raster img(4, 4, 3, 0.25f);
    img.at(1, 1, 0) = 0.1f;
    CHECK(reshade(img, Raster(4, 4, 1, 1.0f)).data == img.data);
    const Raster two = reshade(img, Raster(4, 4, 1, 2.0f));
    CHECK(two.at(0, 0, 0) == doctest::Approx(0.5));
    CHECK(two.at(1, 1, 0) / two.at(1, 1, 1) == doctest::Approx(0.1 / 0.25));
    CHECK(reshade(img, Raster(4, 4, 1, 9.0f)).at(0, 0, 0) == 1.0f);
    CHECK_THROWS_AS(reshade(img, Raster(3, 4, 1, 1.0f)), Error);
}
