#include "caric/synthetic_image.hpp"

#include <algorithm>
#include <cmath>

namespace caric {

namespace {

double lattice(std::uint64_t seed, int octave, int ix, int iy, int channel)
{
    std::uint64_t h = seed * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(octave) * 0xc2b2ae3d27d4eb4fULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) * 0x165667b19e3779f9ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) * 0x27d4eb2f165667c5ULL;
    h ^= static_cast<std::uint64_t>(channel) * 0x85ebca77c2b2ae63ULL;
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
}

double value_noise(std::uint64_t seed, int octave, double x, double y, int channel)
{
    const int ix = static_cast<int>(std::floor(x)), iy = static_cast<int>(std::floor(y));
    const double fx = x - ix, fy = y - iy;
    const double sx = fx * fx * (3.0 - 2.0 * fx), sy = fy * fy * (3.0 - 2.0 * fy);
    const double a = lattice(seed, octave, ix, iy, channel), b = lattice(seed, octave, ix + 1, iy, channel);
    const double c = lattice(seed, octave, ix, iy + 1, channel), d = lattice(seed, octave, ix + 1, iy + 1, channel);
    return (a + (b - a) * sx) * (1.0 - sy) + (c + (d - c) * sx) * sy;
}

} // namespace

Raster procedural_texture(int width, int height, std::uint64_t seed, const Eigen::Vector3d& base, double amplitude,
                          double feature_px, int octaves)
{
    Raster out(width, height, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double lum = 0.0, norm = 0.0, amp = 1.0, period = feature_px;
            Eigen::Vector3d chroma = Eigen::Vector3d::Zero();
            for (int o = 0; o < octaves; ++o) {
                const double u = (x + 0.5) / period, v = (y + 0.5) / period;
                lum += amp * value_noise(seed, o, u, v, 0);
                if (o < 2)
                    for (int c = 0; c < 3; ++c)
                        chroma[c] += 0.3 * amp * value_noise(seed, o, u, v, c + 1);
                norm += amp;
                amp *= 0.6;
                period *= 0.5;
            }
            for (int c = 0; c < 3; ++c) {
                const double v = base[c] * (1.0 + amplitude * (lum + chroma[c]) / norm * 2.0);
                out.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

SHLighting default_lighting()
{
    const Eigen::Vector3d d = Eigen::Vector3d(0.25, -0.35, -1.0).normalized();
    const Eigen::Matrix<double, 9, 1> y = sh_basis(d);
    // Clamped-cosine convolution weights per band.
    const double a[3] = {M_PI, 2.0 * M_PI / 3.0, M_PI / 4.0};
    SHLighting l;
    for (int k = 0; k < 9; ++k) {
        const int band = k == 0 ? 0 : (k < 4 ? 1 : 2);
        l.coeffs[k] = 0.3 * a[band] * y[k];
    }
    l.coeffs[0] += 0.35 / 0.282094791773878; // ambient
    return l;
}

Portrait make_portrait(const FaceMesh& mesh, const Camera& camera, const SHLighting& light, std::uint64_t seed)
{
    const int w = camera.width, h = camera.height;
    const Raster skin = procedural_texture(w, h, seed, Eigen::Vector3d(0.62, 0.42, 0.33), 0.25, 48.0, 6);
    const Raster background = procedural_texture(w, h, seed + 1, Eigen::Vector3d(0.35, 0.45, 0.55), 0.5, 96.0, 6);

    RenderOptions opts;
    opts.exclude_eyes_mouth = false;
    Portrait p;
    p.render = render_textured(mesh, mesh, camera, skin, opts);
    p.face = p.render.mask;
    p.image = background;
    p.albedo = Raster(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!p.face(x, y))
                continue;
            const std::size_t k = p.render.color.index(x, y);
            const std::uint8_t r = p.render.region[k];
            const double dark = (r == static_cast<std::uint8_t>(Region::Eyes) || r == static_cast<std::uint8_t>(Region::Mouth)) ? 0.45 : 1.0;
            const Eigen::Vector3d n(p.render.normals_after.at(x, y, 0), p.render.normals_after.at(x, y, 1),
                                    p.render.normals_after.at(x, y, 2));
            const double shade = std::max(0.0, light.eval(n));
            for (int c = 0; c < 3; ++c) {
                const float a = static_cast<float>(dark * p.render.color.at(x, y, c));
                p.albedo.at(x, y, c) = a;
                p.image.at(x, y, c) = static_cast<float>(std::clamp(a * shade, 0.0, 1.0));
            }
        }
    }
    return p;
}

} // namespace caric
