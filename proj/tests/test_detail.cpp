#include <doctest.h>

#include "caric/detail.hpp"
#include "caric/error.hpp"
#include "caric/exaggeration.hpp"
#include "caric/image_ops.hpp"
#include "caric/lambda_field.hpp"
#include "caric/render.hpp"
#include "caric/synthetic.hpp"
#include "caric/synthetic_image.hpp"

#include <cmath>
#include <random>

using namespace caric;

namespace {

FaceMesh face(int grid = 32)
{
    FaceShapeParams p;
    p.rows = grid;
    p.cols = grid;
    return make_face_mesh(p);
}

Raster zero_enhancer(const Raster& patch, const Raster&)
{
    return Raster(patch.width, patch.height, patch.channels);
}

// Exaggerated portrait with its render stretch, as the pipeline sees it.
struct Scene {
    Raster image;
    Raster stretch;
    Mask mask;
};

Scene scene(std::uint64_t seed, int size = 512)
{
    const FaceMesh mesh = face(32);
    const Camera cam = fit_frontal_camera(mesh, size, size, 0.8);
    const Portrait portrait = make_portrait(mesh, cam, default_lighting(), seed);
    SynthConfig cfg;
    cfg.scale_min = 1.2;
    cfg.scale_max = 3.0;
    const auto ctx = SolverContext::prefactor(mesh);
    const FaceMesh ex = exaggerate(mesh, synth_exaggeration(mesh, seed, cfg).lambda, *ctx);
    RenderOptions opts;
    opts.exclude_eyes_mouth = false;
    const RenderOutput r = render_textured(mesh, ex, cam, portrait.image, opts);
    Scene s;
    s.image = r.color;
    s.image.mask.clear();
    s.stretch = r.stretch;
    s.mask = r.mask;
    return s;
}

Raster plain_stretch(Raster st)
{
    if (st.has_mask())
        for (std::size_t p = 0; p < st.pixel_count(); ++p)
            if (!st.mask[p])
                st.data[p] = 0.0f;
    st.mask.clear();
    return st;
}

} // namespace

TEST_CASE("patch plans cover the mask with inward-shifted edge patches")
{
    CHECK(plan_patches(Mask(256, 256, true)).origins.size() == 1u);
    const PatchPlan two = plan_patches(Mask(448, 256, true));
    REQUIRE(two.origins.size() == 2u);
    CHECK(two.origins[0] == std::pair{0, 0});
    CHECK(two.origins[1] == std::pair{192, 0});
    CHECK(plan_patches(Mask(600, 300)).origins.empty());

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 100 + static_cast<int>(rng() % 900), h = 100 + static_cast<int>(rng() % 900);
        Mask m(w, h);
        for (int k = 0; k < 5; ++k) {
            const int cx = static_cast<int>(rng() % static_cast<unsigned>(w)), cy = static_cast<int>(rng() % static_cast<unsigned>(h));
            const int r = 5 + static_cast<int>(rng() % 80);
            for (int y = std::max(0, cy - r); y < std::min(h, cy + r); ++y)
                for (int x = std::max(0, cx - r); x < std::min(w, cx + r); ++x)
                    m.set(x, y, true);
        }
        const PatchPlan plan = plan_patches(m);
        Mask covered(w, h);
        for (const auto& [x0, y0] : plan.origins) {
            CHECK(x0 >= 0);
            CHECK(y0 >= 0);
            CHECK(x0 + 256 <= std::max(w, 256));
            CHECK(y0 + 256 <= std::max(h, 256));
            for (int y = y0; y < std::min(h, y0 + 256); ++y)
                for (int x = x0; x < std::min(w, x0 + 256); ++x)
                    covered.set(x, y, true);
        }
        for (std::size_t p = 0; p < m.data.size(); ++p)
            if (m.data[p])
                REQUIRE(covered.data[p]);
    }
}

TEST_CASE("feathered merge: zero enhancer is exact, weights normalize, single cover passes through")
{
    const Raster img = procedural_texture(700, 500, 5, Eigen::Vector3d(0.5, 0.4, 0.3), 0.3, 20.0);
    const PatchPlan plan = plan_patches(Mask(700, 500, true));
    CHECK(enhance(img, {}, plan, zero_enhancer).data == img.data);

    EnhanceOptions loose;
    loose.max_mean = 1.0;
    Raster merged;
    enhance(img, {}, plan, [](const Raster& p, const Raster&) { return Raster(p.width, p.height, p.channels, 0.01f); },
            loose, &merged);
    for (float v : merged.data)
        REQUIRE(std::abs(v - 0.01f) < 1e-7f);

    // Residual that depends on content: pixels covered by one patch get that
    // patch's value unchanged.
    auto content = [](const Raster& p, const Raster&) {
        Raster r(p.width, p.height, p.channels);
        for (std::size_t i = 0; i < r.data.size(); ++i)
            r.data[i] = 0.1f * (p.data[i] - 0.4f);
        return r;
    };
    enhance(img, {}, plan, content, loose, &merged);
    for (int y = 0; y < 500; ++y)
        for (int x = 0; x < 700; ++x) {
            int cover = 0;
            for (const auto& [x0, y0] : plan.origins)
                cover += x >= x0 && x < x0 + 256 && y >= y0 && y < y0 + 256;
            if (cover == 1)
                REQUIRE(merged.at(x, y, 1) == 0.1f * (img.at(x, y, 1) - 0.4f));
        }
}

TEST_CASE("enhancer contract violations name the patch")
{
    const Raster img(300, 300, 3, 0.5f);
    const PatchPlan plan = plan_patches(Mask(300, 300, true));
    auto offset = [](const Raster& p, const Raster&) { return Raster(p.width, p.height, p.channels, 0.05f); };
    auto nan = [](const Raster& p, const Raster&) {
        Raster r(p.width, p.height, p.channels);
        r.data[7] = std::nanf("");
        return r;
    };
    for (const ResidualEnhancer& e : {ResidualEnhancer(offset), ResidualEnhancer(nan)}) {
        try {
            enhance(img, {}, plan, e);
            FAIL("expected a contract violation");
        } catch (const Error& err) {
            CHECK(err.code() == ErrorCode::ContractViolation);
            CHECK(std::string(err.what()).find("patch 0 at (0, 0)") != std::string::npos);
        }
    }
    // Two enhancers differing by a patch-constant offset: only one conforms.
    auto shifted = [](const Raster& p, const Raster& s) {
        Raster r = baseline_enhancer(p, s);
        for (float& v : r.data)
            v += 0.03f;
        return r;
    };
    const Raster tex = procedural_texture(300, 300, 1, Eigen::Vector3d(0.5, 0.5, 0.5), 0.3, 8.0);
    const Raster st(300, 300, 1, 2.0f);
    CHECK_NOTHROW(enhance(tex, st, plan, [](const Raster& p, const Raster& s) { return baseline_enhancer(p, s); }));
    CHECK_THROWS_AS(enhance(tex, st, plan, shifted), Error);
}

TEST_CASE("baseline enhancer: silent without stretch or texture, sharpens stretched areas")
{
    const Raster tex = procedural_texture(256, 256, 9, Eigen::Vector3d(0.5, 0.4, 0.3), 0.3, 6.0);
    for (float v : baseline_enhancer(tex, Raster(256, 256, 1, 1.0f)).data)
        CHECK(v == 0.0f);
    const Raster flat(256, 256, 3, 0.37f);
    for (float v : baseline_enhancer(flat, Raster(256, 256, 1, 4.0f)).data)
        CHECK(std::abs(v) < 1e-6f);

    Raster stretch(256, 256, 1, 1.0f);
    for (int y = 0; y < 256; ++y)
        for (int x = 128; x < 256; ++x)
            stretch.at(x, y) = 2.5f;
    const Raster blurry = gaussian_blur(tex, 1.2);
    const Raster r = baseline_enhancer(blurry, stretch);
    Raster out = blurry;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += r.data[i];
    Mask right(256, 256), left(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            (x >= 136 ? right : left).set(x, y, x >= 136 || x < 120);
    CHECK(laplacian_energy(out, &right) > 1.2 * laplacian_energy(blurry, &right));
    CHECK(laplacian_energy(out, &left) == doctest::Approx(laplacian_energy(blurry, &left)));
}

TEST_CASE("residual merge passes the seam metric, direct colour tiling does not")
{
    int direct_fail = 0;
    const int samples = 4;
    for (int k = 0; k < samples; ++k) {
        const Scene s = scene(100 + static_cast<std::uint64_t>(k));
        const PatchPlan plan = plan_patches(s.mask);
        REQUIRE(plan.origins.size() >= 4u);
        const ResidualEnhancer base = [](const Raster& p, const Raster& st) { return baseline_enhancer(p, st); };
        const Raster patched = enhance(s.image, s.stretch, plan, base);
        const Raster whole = enhance_whole(s.image, s.stretch, base);
        const SeamMetric residual = seam_metric(patched, whole, plan, s.mask);
        CHECK_MESSAGE(residual.passes(), "sample " << k << " ratio " << residual.ratio());

        const Raster direct = enhance_direct(s.image, s.stretch, plan, direct_color_enhancer);
        const Raster direct_whole = direct_color_enhancer(s.image, plain_stretch(s.stretch));
        const SeamMetric d = seam_metric(direct, direct_whole, plan, s.mask);
        MESSAGE("sample " << k << " residual ratio " << residual.ratio() << " direct ratio " << d.ratio());
        direct_fail += !d.passes();
    }
    CHECK(direct_fail * 2 >= samples);
}

TEST_CASE("training pairs: counts, identity level, sharpness ordering")
{
    CHECK(training_pair_count(899, 10) == 8990u);
    CHECK(training_pair_count(3, 4) == 12u);

    const FaceMesh mesh = face(32);
    const Camera cam = fit_frontal_camera(mesh, 320, 320, 0.8);
    const Portrait portrait = make_portrait(mesh, cam, default_lighting(), 4);
    const TrainingPair same = make_pair(portrait.image, mesh, mesh, cam);
    CHECK(same.stretch == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(psnr(same.blurred, same.sharp, &same.mask) > 40.0);

    PairConfig cfg;
    cfg.levels = 5;
    cfg.crops = 3;
    cfg.crop = 128;
    const auto pairs = make_training_pairs(portrait.image, mesh, cam, cfg);
    CHECK(pairs.size() <= 5u);
    int stretched = 0, sharper = 0;
    for (const auto& p : pairs) {
        CHECK(p.crops.size() == 3u);
        CHECK(p.blurred.same_shape(p.sharp));
        if (p.stretch > 1.3) {
            ++stretched;
            sharper += laplacian_energy(p.sharp, &p.mask) > laplacian_energy(p.blurred, &p.mask);
        }
    }
    CHECK(stretched > 0);
    CHECK(sharper * 100 >= stretched * 95);
}
