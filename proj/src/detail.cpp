#include "caric/detail.hpp"

#include "caric/error.hpp"
#include "caric/exaggeration.hpp"
#include "caric/image_io.hpp"
#include "caric/image_ops.hpp"
#include "caric/lambda_field.hpp"
#include "caric/render.hpp"

#include <numbers>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace caric {

namespace {

std::vector<int> axis_origins(int extent, int patch, int stride)
{
    std::vector<int> out;
    for (int x = 0;; x += stride) {
        if (x + patch >= extent) {
            out.push_back(extent - patch);
            break;
        }
        out.push_back(x);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Pads by edge replication up to w x h.
Raster pad_to(const Raster& image, int w, int h)
{
    if (image.width == w && image.height == h)
        return image;
    Raster out(w, h, image.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < image.channels; ++c)
                out.at(x, y, c) = image.at(std::min(x, image.width - 1), std::min(y, image.height - 1), c);
    return out;
}

Raster stretch_or_ones(const Raster& stretch, int w, int h)
{
    if (stretch.empty())
        return Raster(w, h, 1, 1.0f);
    if (stretch.width != w || stretch.height != h || stretch.channels != 1)
        throw Error(ErrorCode::InvalidArgument, "stretch map must be one channel at image size");
    Raster s = stretch;
    // Pixels outside the render carry no stretch.
    if (s.has_mask())
        for (std::size_t p = 0; p < s.pixel_count(); ++p)
            if (!s.mask[p])
                s.data[p] = 0.0f;
    s.mask.clear();
    return s;
}

std::string origin_text(const std::pair<int, int>& o)
{
    return "(" + std::to_string(o.first) + ", " + std::to_string(o.second) + ")";
}

void check_residual(const Raster& r, const Raster& patch, std::size_t k, const std::pair<int, int>& origin,
                    double max_mean)
{
    const std::string where = "patch " + std::to_string(k) + " at " + origin_text(origin);
    if (!r.same_shape(patch))
        throw Error(ErrorCode::ContractViolation, where + ": residual shape differs from the patch");
    std::vector<double> mean(static_cast<std::size_t>(r.channels), 0.0);
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        if (!std::isfinite(r.data[i]))
            throw Error(ErrorCode::ContractViolation, where + ": residual is not finite");
        mean[i % static_cast<std::size_t>(r.channels)] += r.data[i];
    }
    for (int c = 0; c < r.channels; ++c) {
        const double m = mean[static_cast<std::size_t>(c)] / static_cast<double>(r.pixel_count());
        if (std::abs(m) > max_mean)
            throw Error(ErrorCode::ContractViolation,
                        where + ": residual mean " + std::to_string(m) + " in channel " + std::to_string(c) +
                            " exceeds the high-frequency bound");
    }
}

template <typename F>
void parallel_for(std::size_t count, int workers, F&& body)
{
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n = std::min<std::size_t>(count, workers > 0 ? static_cast<std::size_t>(workers) : hw);
    if (n <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    // Errors are kept per item so the one reported is the lowest index,
    // whatever the thread timing.
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

double mean_stretch(const RenderOutput& r)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < r.mask.data.size(); ++p)
        if (r.mask.data[p]) {
            sum += r.stretch.data[p];
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 1.0;
}

} // namespace

PatchPlan plan_patches(const Mask& mask, int patch, int stride)
{
    if (patch < 1 || stride < 1 || stride > patch)
        throw Error(ErrorCode::InvalidArgument, "patch stride must be in [1, patch]");
    PatchPlan plan;
    plan.width = mask.width;
    plan.height = mask.height;
    plan.patch = patch;
    plan.stride = stride;
    const int w = std::max(mask.width, patch), h = std::max(mask.height, patch);
    // Summed-area table of the mask for the touch test.
    std::vector<int> sat(static_cast<std::size_t>((mask.width + 1) * (mask.height + 1)), 0);
    auto at = [&](int x, int y) -> int& { return sat[static_cast<std::size_t>(y * (mask.width + 1) + x)]; };
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            at(x + 1, y + 1) = (mask(x, y) ? 1 : 0) + at(x, y + 1) + at(x + 1, y) - at(x, y);
    for (int y : axis_origins(h, patch, stride))
        for (int x : axis_origins(w, patch, stride)) {
            const int x1 = std::min(x + patch, mask.width), y1 = std::min(y + patch, mask.height);
            if (x1 > x && y1 > y && at(x1, y1) - at(x, y1) - at(x1, y) + at(x, y) > 0)
                plan.origins.emplace_back(x, y);
        }
    return plan;
}

double feather_weight(int i, int j, int patch, int overlap)
{
    // Raised cosine: near-zero weight where a patch's own borders distort its residual.
    const double ramp = std::max(1, overlap);
    auto ease = [&](int k) {
        const double t = std::min({1.0, (k + 0.5) / ramp, (patch - k - 0.5) / ramp});
        const double s = std::sin(0.5 * std::numbers::pi * t);
        return s * s;
    };
    return ease(i) * ease(j);
}

Raster enhance(const Raster& image, const Raster& stretch, const PatchPlan& plan, const ResidualEnhancer& enhancer,
               const EnhanceOptions& options, Raster* merged_residual)
{
    if (image.width != plan.width || image.height != plan.height)
        throw Error(ErrorCode::InvalidArgument, "patch plan was made for another image size");
    const int w = std::max(image.width, plan.patch), h = std::max(image.height, plan.patch);
    const Raster padded = pad_to(image, w, h);
    const Raster s = pad_to(stretch_or_ones(stretch, image.width, image.height), w, h);
    const int ch = image.channels, p = plan.patch;

    std::vector<Raster> residuals(plan.origins.size());
    parallel_for(plan.origins.size(), options.workers, [&](std::size_t k) {
        const auto [x0, y0] = plan.origins[k];
        const Raster patch = crop(padded, x0, y0, p, p);
        Raster r = enhancer(patch, crop(s, x0, y0, p, p));
        check_residual(r, patch, k, plan.origins[k], options.max_mean);
        residuals[k] = std::move(r);
    });

    // Fixed-order reduction keeps the result independent of thread timing.
    std::vector<double> num(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(ch), 0.0);
    std::vector<double> den(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
    const int overlap = p - plan.stride;
    for (std::size_t k = 0; k < residuals.size(); ++k) {
        const auto [x0, y0] = plan.origins[k];
        for (int j = 0; j < p; ++j)
            for (int i = 0; i < p; ++i) {
                const double wt = feather_weight(i, j, p, overlap);
                const std::size_t q = static_cast<std::size_t>(y0 + j) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x0 + i);
                den[q] += wt;
                for (int c = 0; c < ch; ++c)
                    num[q * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c)] += wt * residuals[k].at(i, j, c);
            }
    }
    Raster merged(image.width, image.height, ch);
    Raster out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const std::size_t q = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
            if (den[q] <= 0.0)
                continue;
            for (int c = 0; c < ch; ++c) {
                const double r = num[q * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c)] / den[q];
                merged.at(x, y, c) = static_cast<float>(r);
                if (r != 0.0)
                    out.at(x, y, c) = static_cast<float>(std::clamp(image.at(x, y, c) + r, 0.0, 1.0));
            }
        }
    if (merged_residual)
        *merged_residual = std::move(merged);
    return out;
}

Raster enhance_whole(const Raster& image, const Raster& stretch, const ResidualEnhancer& enhancer)
{
    const Raster r = enhancer(image, stretch_or_ones(stretch, image.width, image.height));
    if (!r.same_shape(image))
        throw Error(ErrorCode::ContractViolation, "residual shape differs from the image");
    Raster out = image;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (r.data[i] != 0.0f)
            out.data[i] = std::clamp(out.data[i] + r.data[i], 0.0f, 1.0f);
    return out;
}

Raster enhance_direct(const Raster& image, const Raster& stretch, const PatchPlan& plan, const ColorEnhancer& enhancer)
{
    if (image.width != plan.width || image.height != plan.height)
        throw Error(ErrorCode::InvalidArgument, "patch plan was made for another image size");
    const int w = std::max(image.width, plan.patch), h = std::max(image.height, plan.patch);
    const Raster padded = pad_to(image, w, h);
    const Raster s = pad_to(stretch_or_ones(stretch, image.width, image.height), w, h);
    const int p = plan.patch;
    Raster out = image;
    std::vector<double> best(image.pixel_count(), std::numeric_limits<double>::infinity());
    for (const auto& [x0, y0] : plan.origins) {
        const Raster colors = enhancer(crop(padded, x0, y0, p, p), crop(s, x0, y0, p, p));
        if (colors.width != p || colors.height != p || colors.channels != image.channels)
            throw Error(ErrorCode::ContractViolation, "colour patch shape differs at " + origin_text({x0, y0}));
        const double cx = x0 + p / 2.0, cy = y0 + p / 2.0;
        for (int j = 0; j < p && y0 + j < image.height; ++j)
            for (int i = 0; i < p && x0 + i < image.width; ++i) {
                const double d = std::max(std::abs(x0 + i + 0.5 - cx), std::abs(y0 + j + 0.5 - cy));
                double& b = best[image.index(x0 + i, y0 + j)];
                if (d >= b)
                    continue;
                b = d;
                for (int c = 0; c < image.channels; ++c)
                    out.at(x0 + i, y0 + j, c) = std::clamp(colors.at(i, j, c), 0.0f, 1.0f);
            }
    }
    return out;
}

Raster baseline_enhancer(const Raster& patch, const Raster& stretch, double gain, double sigma_scale)
{
    Raster r(patch.width, patch.height, patch.channels);
    float s_max = 0.0f;
    for (float v : stretch.data)
        s_max = std::max(s_max, v);
    if (s_max <= 1.0f)
        return r;
    // Blur stack at fixed stretch levels, interpolated per pixel in sqrt(stretch).
    static const double kLevels[] = {1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0};
    const int n_levels = static_cast<int>(std::size(kLevels));
    int top = 1;
    while (top < n_levels - 1 && kLevels[top] < s_max)
        ++top;
    std::vector<Raster> stack;
    for (int l = 0; l <= top; ++l)
        stack.push_back(gaussian_blur(patch, sigma_scale * std::sqrt(kLevels[l])));
    for (int y = 0; y < patch.height; ++y)
        for (int x = 0; x < patch.width; ++x) {
            const double s = std::clamp(static_cast<double>(stretch.at(x, y)), 0.0, kLevels[top]);
            if (s <= 1.0)
                continue;
            int l = 0;
            while (l + 1 < top && kLevels[l + 1] < s)
                ++l;
            const double a = std::sqrt(kLevels[l]), b = std::sqrt(kLevels[l + 1]);
            const double t = std::clamp((std::sqrt(s) - a) / (b - a), 0.0, 1.0);
            const double fade = gain * std::min(1.0, s - 1.0);
            for (int c = 0; c < patch.channels; ++c) {
                const double blurred = (1.0 - t) * stack[static_cast<std::size_t>(l)].at(x, y, c) +
                                       t * stack[static_cast<std::size_t>(l + 1)].at(x, y, c);
                r.at(x, y, c) = static_cast<float>(fade * (patch.at(x, y, c) - blurred));
            }
        }
    return r;
}

Raster direct_color_enhancer(const Raster& patch, const Raster& stretch)
{
    const Raster detail = baseline_enhancer(patch, stretch);
    Raster out(patch.width, patch.height, patch.channels);
    for (int c = 0; c < patch.channels; ++c) {
        double mean = 0.0;
        for (int y = 0; y < patch.height; ++y)
            for (int x = 0; x < patch.width; ++x)
                mean += patch.at(x, y, c);
        mean /= static_cast<double>(patch.pixel_count());
        // Shrinks the window's tone towards mid-grey and stretches contrast
        // around the window mean.
        const double tone = 0.5 + 0.8 * (mean - 0.5);
        for (int y = 0; y < patch.height; ++y)
            for (int x = 0; x < patch.width; ++x)
                out.at(x, y, c) = static_cast<float>(tone + 1.15 * (patch.at(x, y, c) - mean) + detail.at(x, y, c));
    }
    return out;
}

PatchBoundaries patch_boundaries(const PatchPlan& plan)
{
    PatchBoundaries b;
    auto add = [](std::vector<int>& v, int line, int extent) {
        if (line > 0 && line < extent)
            v.push_back(line);
    };
    std::vector<int> xs, ys;
    for (const auto& [x, y] : plan.origins) {
        xs.push_back(x);
        ys.push_back(y);
    }
    for (auto* axis : {&xs, &ys}) {
        std::sort(axis->begin(), axis->end());
        axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
    }
    const int p = plan.patch;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        add(b.columns, xs[i], plan.width);
        add(b.columns, xs[i] + p, plan.width);
        if (i + 1 < xs.size())
            add(b.columns, static_cast<int>(std::floor((xs[i] + xs[i + 1] + p) / 2.0 - 0.5)) + 1, plan.width);
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        add(b.rows, ys[i], plan.height);
        add(b.rows, ys[i] + p, plan.height);
        if (i + 1 < ys.size())
            add(b.rows, static_cast<int>(std::floor((ys[i] + ys[i + 1] + p) / 2.0 - 0.5)) + 1, plan.height);
    }
    for (auto* v : {&b.columns, &b.rows}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    return b;
}

SeamMetric seam_metric(const Raster& output, const Raster& reference, const PatchPlan& plan, const Mask& region)
{
    if (!output.same_shape(reference) || region.width != output.width || region.height != output.height)
        throw Error(ErrorCode::InvalidArgument, "seam metric inputs differ in size");
    const int w = output.width, h = output.height, ch = output.channels;
    const PatchBoundaries lines = patch_boundaries(plan);
    std::vector<char> on_col(static_cast<std::size_t>(w) + 1, 0), on_row(static_cast<std::size_t>(h) + 1, 0);
    for (int c : lines.columns)
        on_col[static_cast<std::size_t>(c)] = 1;
    for (int r : lines.rows)
        on_row[static_cast<std::size_t>(r)] = 1;

    auto dev = [&](int x, int y, int c) { return static_cast<double>(output.at(x, y, c)) - reference.at(x, y, c); };
    SeamMetric m;
    std::vector<double> grads;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!region(x, y))
                continue;
            // Pairs (x-1, y) | (x, y) and (x, y-1) | (x, y).
            if (x > 0 && region(x - 1, y)) {
                for (int c = 0; c < ch; ++c) {
                    if (on_col[static_cast<std::size_t>(x)])
                        m.max_jump = std::max(m.max_jump, std::abs(dev(x, y, c) - dev(x - 1, y, c)));
                    else
                        grads.push_back(std::abs(static_cast<double>(output.at(x, y, c)) - output.at(x - 1, y, c)));
                }
            }
            if (y > 0 && region(x, y - 1)) {
                for (int c = 0; c < ch; ++c) {
                    if (on_row[static_cast<std::size_t>(y)])
                        m.max_jump = std::max(m.max_jump, std::abs(dev(x, y, c) - dev(x, y - 1, c)));
                    else
                        grads.push_back(std::abs(static_cast<double>(output.at(x, y, c)) - output.at(x, y - 1, c)));
                }
            }
        }
    if (!grads.empty()) {
        const std::size_t k = static_cast<std::size_t>(0.95 * static_cast<double>(grads.size() - 1));
        std::nth_element(grads.begin(), grads.begin() + static_cast<std::ptrdiff_t>(k), grads.end());
        m.gradient_p95 = grads[k];
    }
    return m;
}

std::size_t training_pair_count(std::size_t photos, int levels)
{
    return photos * static_cast<std::size_t>(std::max(0, levels));
}

TrainingPair make_pair(const Raster& image, const FaceMesh& mesh, const FaceMesh& exaggerated, const Camera& camera)
{
    RenderOptions opts;
    opts.exclude_eyes_mouth = false;
    const RenderOutput sharp = render_textured(mesh, exaggerated, camera, image, opts);
    TrainingPair pair;
    pair.stretch = mean_stretch(sharp);
    pair.mask = sharp.mask;
    pair.sharp = sharp.color;
    if (pair.stretch <= 1.0) {
        pair.blurred = sharp.color;
        return pair;
    }
    const double f = std::sqrt(pair.stretch);
    const int lw = std::max(1, static_cast<int>(std::lround(image.width / f)));
    const int lh = std::max(1, static_cast<int>(std::lround(image.height / f)));
    const Raster low = resize(resize(image, lw, lh, true), image.width, image.height, false);
    pair.blurred = render_textured(mesh, exaggerated, camera, low, opts).color;
    return pair;
}

std::vector<TrainingPair> make_training_pairs(const Raster& image, const FaceMesh& mesh, const Camera& camera,
                                              const PairConfig& config)
{
    if (config.levels < 1 || config.crop < 1)
        throw Error(ErrorCode::InvalidArgument, "pair generation needs at least one level and a crop size");
    SynthConfig synth;
    synth.scale_min = config.scale_min;
    synth.scale_max = config.scale_max;
    const SynthResult style = synth_exaggeration(mesh, config.seed, synth);
    const auto context = SolverContext::prefactor(mesh);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<TrainingPair> pairs;
    for (int k = 1; k <= config.levels; ++k) {
        const double t = static_cast<double>(k) / config.levels;
        LambdaField lambda = style.lambda;
        const LambdaBounds bounds;
        lambda.values = (style.lambda.values.array() * (1.0 + t * (config.global_max - 1.0)))
                            .cwiseMax(bounds.min)
                            .cwiseMin(bounds.max)
                            .matrix();
        TrainingPair pair = make_pair(image, mesh, exaggerate(mesh, lambda, *context), camera);
        pair.level = k;
        if (pair.stretch < 1.0)
            continue;
        std::vector<int> face_pixels;
        for (std::size_t p = 0; p < pair.mask.data.size(); ++p)
            if (pair.mask.data[p])
                face_pixels.push_back(static_cast<int>(p));
        if (!face_pixels.empty() && image.width >= config.crop && image.height >= config.crop) {
            std::uniform_int_distribution<std::size_t> pick(0, face_pixels.size() - 1);
            for (int c = 0; c < config.crops; ++c) {
                const int q = face_pixels[pick(rng)];
                const int x = std::clamp(q % image.width - config.crop / 2, 0, image.width - config.crop);
                const int y = std::clamp(q / image.width - config.crop / 2, 0, image.height - config.crop);
                pair.crops.emplace_back(x, y);
            }
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::size_t write_training_pairs(const std::filesystem::path& out_dir, int photo_index,
                                 const std::vector<TrainingPair>& pairs, int crop_size)
{
    namespace fs = std::filesystem;
    auto name = [](int photo, const std::string& suffix) {
        std::ostringstream s;
        s << "img_" << std::setw(4) << std::setfill('0') << photo << suffix;
        return s.str();
    };
    fs::create_directories(out_dir);
    std::ofstream manifest(out_dir / "pairs.jsonl", std::ios::app);
    if (!manifest)
        throw Error(ErrorCode::Io, "cannot open " + (out_dir / "pairs.jsonl").string());
    for (const auto& pair : pairs) {
        const std::string level = "level_" + std::to_string(pair.level);
        const fs::path pdir = out_dir / "pairs" / level, cdir = out_dir / "crops" / level;
        fs::create_directories(pdir);
        fs::create_directories(cdir);
        nlohmann::json rec;
        rec["photo"] = photo_index;
        rec["level"] = pair.level;
        rec["stretch"] = pair.stretch;
        rec["b"] = (fs::path("pairs") / level / name(photo_index, "_b.png")).generic_string();
        rec["s"] = (fs::path("pairs") / level / name(photo_index, "_s.png")).generic_string();
        save_png(out_dir / rec["b"].get<std::string>(), pair.blurred);
        save_png(out_dir / rec["s"].get<std::string>(), pair.sharp);
        nlohmann::json crops = nlohmann::json::array();
        for (std::size_t c = 0; c < pair.crops.size(); ++c) {
            std::ostringstream suffix;
            suffix << "_c" << std::setw(2) << std::setfill('0') << c;
            const auto [x, y] = pair.crops[c];
            const std::string b = (fs::path("crops") / level / name(photo_index, suffix.str() + "_b.png")).generic_string();
            const std::string s = (fs::path("crops") / level / name(photo_index, suffix.str() + "_s.png")).generic_string();
            save_png(out_dir / b, crop(pair.blurred, x, y, crop_size, crop_size));
            save_png(out_dir / s, crop(pair.sharp, x, y, crop_size, crop_size));
            crops.push_back({{"x", x}, {"y", y}, {"b", b}, {"s", s}});
        }
        rec["crops"] = crops;
        manifest << rec.dump() << '\n';
    }
    return pairs.size();
}

} // namespace caric
