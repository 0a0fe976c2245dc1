#include "caric/relight.hpp"

#include "caric/composite.hpp"
#include "caric/error.hpp"
#include "caric/image_ops.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace caric {

namespace {

struct Samples {
    std::vector<int> pixel;                      // y * w + x
    std::vector<int> slot;                       // per image pixel, -1 if unused
    std::vector<Eigen::Vector3d> normal;
    Eigen::VectorXd intensity;
    std::vector<std::pair<int, int>> edges;      // 4-neighbour pairs of samples
};

Samples gather(const Raster& gray, const Raster& normals, const Mask& region)
{
    if (gray.channels != 1 || normals.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "lighting needs a grey image and 3-channel normals");
    if (gray.width != normals.width || gray.height != normals.height || region.width != gray.width ||
        region.height != gray.height)
        throw Error(ErrorCode::InvalidArgument, "lighting inputs differ in size");
    const int w = gray.width, h = gray.height;
    Samples s;
    s.slot.assign(gray.pixel_count(), -1);
    std::vector<double> values;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!region(x, y) || !gray.valid(x, y) || !normals.valid(x, y))
                continue;
            const Eigen::Vector3d n(normals.at(x, y, 0), normals.at(x, y, 1), normals.at(x, y, 2));
            const double len = n.norm();
            if (!std::isfinite(len) || len < 1e-6 || !std::isfinite(gray.at(x, y)))
                continue;
            s.slot[static_cast<std::size_t>(y * w + x)] = static_cast<int>(s.pixel.size());
            s.pixel.push_back(y * w + x);
            s.normal.push_back(n / len);
            values.push_back(gray.at(x, y));
        }
    s.intensity = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < s.pixel.size(); ++i) {
        const int x = s.pixel[i] % w, y = s.pixel[i] / w;
        if (x + 1 < w && s.slot[static_cast<std::size_t>(s.pixel[i] + 1)] >= 0)
            s.edges.emplace_back(static_cast<int>(i), s.slot[static_cast<std::size_t>(s.pixel[i] + 1)]);
        if (y + 1 < h && s.slot[static_cast<std::size_t>(s.pixel[i] + w)] >= 0)
            s.edges.emplace_back(static_cast<int>(i), s.slot[static_cast<std::size_t>(s.pixel[i] + w)]);
    }
    return s;
}

Eigen::VectorXd shading(const Samples& s, const SHLighting& light)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(s.normal.size()));
    for (std::size_t i = 0; i < s.normal.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = light.eval(s.normal[i]);
    return out;
}

double objective(const Samples& s, const Eigen::VectorXd& a, const SHLighting& light, const LightingOptions& o)
{
    const double n = static_cast<double>(a.size());
    const double data = (s.intensity - a.cwiseProduct(shading(s, light))).squaredNorm();
    double smooth = 0.0;
    for (const auto& [p, q] : s.edges)
        smooth += (a(p) - a(q)) * (a(p) - a(q));
    return (data + o.mu_albedo * smooth) / n + o.mu_light * light.coeffs.tail<8>().squaredNorm();
}

SHLighting light_step(const Samples& s, const Eigen::VectorXd& a, const LightingOptions& o)
{
    Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
    Eigen::Matrix<double, 9, 1> b = Eigen::Matrix<double, 9, 1>::Zero();
    for (std::size_t i = 0; i < s.normal.size(); ++i) {
        const auto basis = sh_basis(s.normal[i]);
        const double ai = a(static_cast<Eigen::Index>(i));
        m.noalias() += ai * ai * basis * basis.transpose();
        b.noalias() += ai * s.intensity(static_cast<Eigen::Index>(i)) * basis;
    }
    const double n = static_cast<double>(a.size());
    m /= n;
    b /= n;
    for (int k = 1; k < 9; ++k)
        m(k, k) += o.mu_light;
    SHLighting light;
    // DC is unpenalized; a tiny ridge keeps the solve defined when every
    // albedo is zero.
    m(0, 0) += 1e-14;
    light.coeffs = m.ldlt().solve(b);
    return light;
}

Eigen::VectorXd albedo_step(const Samples& s, const SHLighting& light, double mean, const LightingOptions& o)
{
    const Eigen::VectorXd sh = shading(s, light);
    const Eigen::Index n = sh.size();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) + 4 * s.edges.size());
    for (Eigen::Index i = 0; i < n; ++i)
        trips.emplace_back(i, i, sh(i) * sh(i) + 1e-12);
    for (const auto& [p, q] : s.edges) {
        trips.emplace_back(p, p, o.mu_albedo);
        trips.emplace_back(q, q, o.mu_albedo);
        trips.emplace_back(p, q, -o.mu_albedo);
        trips.emplace_back(q, p, -o.mu_albedo);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularSystem, "albedo system is singular");
    // Mean-constrained minimizer: a = u - nu v with A u = b, A v = 1.
    const Eigen::VectorXd u = ldlt.solve(s.intensity.cwiseProduct(sh));
    const Eigen::VectorXd v = ldlt.solve(Eigen::VectorXd::Ones(n));
    const double nu = (u.mean() - mean) / v.mean();
    return u - nu * v;
}

} // namespace

LightingResult estimate_lighting(const Raster& gray, const Raster& normals, const Mask& region,
                                 const LightingOptions& options)
{
    const Samples s = gather(gray, normals, region);
    const int count = static_cast<int>(s.pixel.size());
    if (count < std::max(1, options.min_pixels))
        throw Error(ErrorCode::InsufficientRegion,
                    "lighting region has " + std::to_string(count) + " usable pixels, need " +
                        std::to_string(options.min_pixels));
    const double mean = std::isnan(options.albedo_mean) ? s.intensity.mean() : options.albedo_mean;
    if (!(std::abs(mean) > 0.0))
        throw Error(ErrorCode::InsufficientRegion, "lighting region is black");

    LightingResult result;
    result.pixels = count;
    Eigen::VectorXd a = Eigen::VectorXd::Constant(count, mean);
    for (int k = 0; k < options.alternations; ++k) {
        result.light = light_step(s, a, options);
        a = albedo_step(s, result.light, mean, options);
        result.objective.push_back(objective(s, a, result.light, options));
    }
    if (options.alternations <= 0)
        result.light = light_step(s, a, options);

    result.albedo = Raster(gray.width, gray.height, 1);
    result.albedo.mask.assign(gray.pixel_count(), 0);
    for (int i = 0; i < count; ++i) {
        result.albedo.data[static_cast<std::size_t>(s.pixel[static_cast<std::size_t>(i)])] = static_cast<float>(a(i));
        result.albedo.mask[static_cast<std::size_t>(s.pixel[static_cast<std::size_t>(i)])] = 1;
    }
    if (!result.light.coeffs.allFinite())
        throw Error(ErrorCode::NonFinite, "lighting estimate is not finite");
    return result;
}

LightingResult estimate_lighting(const Raster& gray, const RenderOutput& render, const Mask& region,
                                 const LightingOptions& options)
{
    Raster normals = render.normals_before;
    normals.mask = render.mask.data;
    return estimate_lighting(gray, normals, mask_and(region, render.mask), options);
}

double lighting_objective(const Raster& gray, const Raster& normals, const Mask& region, const Raster& albedo,
                          const SHLighting& light, const LightingOptions& options)
{
    const Samples s = gather(gray, normals, region);
    Eigen::VectorXd a(static_cast<Eigen::Index>(s.pixel.size()));
    for (std::size_t i = 0; i < s.pixel.size(); ++i)
        a(static_cast<Eigen::Index>(i)) = albedo.data[static_cast<std::size_t>(s.pixel[i])];
    return objective(s, a, light, options);
}

Mask mask_boundary(const Mask& face)
{
    Mask out(face.width, face.height);
    for (int y = 0; y < face.height; ++y)
        for (int x = 0; x < face.width; ++x) {
            if (!face(x, y))
                continue;
            const bool edge = !face.inside(x - 1, y) || !face.inside(x + 1, y) || !face.inside(x, y - 1) ||
                              !face.inside(x, y + 1) || !face(x - 1, y) || !face(x + 1, y) || !face(x, y - 1) ||
                              !face(x, y + 1);
            out.set(x, y, edge);
        }
    return out;
}

Raster raw_alpha(const SHLighting& light, const RenderOutput& render, const Mask& face, double epsilon)
{
    const int w = render.width(), h = render.height();
    if (face.width != w || face.height != h)
        throw Error(ErrorCode::InvalidArgument, "face mask size does not match the render");
    Raster alpha(w, h, 1, 1.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!face(x, y) || !render.mask(x, y))
                continue;
            const Eigen::Vector3d n0(render.normals_before.at(x, y, 0), render.normals_before.at(x, y, 1),
                                     render.normals_before.at(x, y, 2));
            const Eigen::Vector3d n1(render.normals_after.at(x, y, 0), render.normals_after.at(x, y, 1),
                                     render.normals_after.at(x, y, 2));
            if (n0 == n1)
                continue;
            alpha.at(x, y) = static_cast<float>(std::max(epsilon, light.eval(n1)) / std::max(epsilon, light.eval(n0)));
        }
    return alpha;
}

Raster build_alpha(const SHLighting& light, const RenderOutput& render, const Mask& face, const AlphaOptions& options)
{
    if (options.downsample < 1 || !(options.lo <= 1.0 && 1.0 <= options.hi))
        throw Error(ErrorCode::InvalidArgument, "alpha options out of range");
    const int w = render.width(), h = render.height();
    const Raster raw = raw_alpha(light, render, face, options.epsilon);
    const int f = options.downsample;
    const int lw = (w + f - 1) / f, lh = (h + f - 1) / f;

    // Coarse grid: a block belongs to the face when all its pixels do; it
    // carries the mean of (alpha - 1) over the block.
    Raster coarse(lw, lh, 1, 0.0f);
    Mask coarse_face(lw, lh);
    for (int by = 0; by < lh; ++by)
        for (int bx = 0; bx < lw; ++bx) {
            bool inside = true;
            double sum = 0.0;
            int n = 0;
            for (int y = by * f; y < std::min(h, (by + 1) * f); ++y)
                for (int x = bx * f; x < std::min(w, (bx + 1) * f); ++x) {
                    inside = inside && face(x, y);
                    sum += raw.at(x, y) - 1.0;
                    ++n;
                }
            coarse_face.set(bx, by, inside);
            if (inside)
                coarse.at(bx, by) = static_cast<float>(sum / n);
        }
    const Mask coarse_interior = mask_and(coarse_face, mask_not(mask_boundary(coarse_face)));
    // Correction form: zero Dirichlet data, so an all-ones ratio gives an exact zero.
    const Raster zero(lw, lh, 1, 0.0f);
    Raster d = poisson_solve(coarse, zero, coarse_interior);
    for (float& v : d.data)
        v = static_cast<float>(std::clamp(1.0 + v, options.lo, options.hi) - 1.0);

    const Mask edge = mask_boundary(face);
    Raster alpha(w, h, 1, 1.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!face(x, y) || edge(x, y))
                continue;
            const double v = f == 1 ? d.at(x, y) : sample_bilinear(d, (x + 0.5) / f, (y + 0.5) / f, 0);
            alpha.at(x, y) = static_cast<float>(std::clamp(1.0 + v, options.lo, options.hi));
        }
    return alpha;
}

Raster build_alpha(const SHLighting& light, const RenderOutput& render, const AlphaOptions& options)
{
    return build_alpha(light, render, mask_or(render.mask, render.excluded), options);
}

Raster reshade(const Raster& composite, const Raster& alpha)
{
    if (alpha.channels != 1 || alpha.width != composite.width || alpha.height != composite.height)
        throw Error(ErrorCode::InvalidArgument, "alpha map size does not match the image");
    Raster out = composite;
    const std::size_t ch = static_cast<std::size_t>(out.channels);
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        for (std::size_t c = 0; c < ch; ++c)
            out.data[p * ch + c] = std::clamp(out.data[p * ch + c] * alpha.data[p], 0.0f, 1.0f);
    return out;
}

} // namespace caric
