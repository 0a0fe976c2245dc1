#include "caric/image_ops.hpp"

#include "caric/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace caric {

namespace {

std::vector<float> gaussian_kernel(double sigma)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : k)
        v = static_cast<float>(v / sum);
    return k;
}

} // namespace

float sample_bilinear(const Raster& image, double x, double y, int channel)
{
    const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width - 1));
    const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int x0 = std::min(static_cast<int>(fx), image.width - 1);
    const int y0 = std::min(static_cast<int>(fy), image.height - 1);
    const int x1 = std::min(x0 + 1, image.width - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ax = fx - x0, ay = fy - y0;
    const double top = (1 - ax) * image.at(x0, y0, channel) + ax * image.at(x1, y0, channel);
    const double bottom = (1 - ax) * image.at(x0, y1, channel) + ax * image.at(x1, y1, channel);
    return static_cast<float>((1 - ay) * top + ay * bottom);
}

void sample_bilinear(const Raster& image, double x, double y, float* out)
{
    for (int c = 0; c < image.channels; ++c)
        out[c] = sample_bilinear(image, x, y, c);
}

Raster gaussian_blur(const Raster& image, double sigma)
{
    if (!(sigma > 0.0))
        return image;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int w = image.width, h = image.height, ch = image.channels;
    Raster tmp(w, h, ch), out(w, h, ch);
    out.mask = image.mask;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                float acc = 0.0f;
                for (int i = -r; i <= r; ++i)
                    acc += k[static_cast<std::size_t>(i + r)] * image.at(std::clamp(x + i, 0, w - 1), y, c);
                tmp.at(x, y, c) = acc;
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                float acc = 0.0f;
                for (int i = -r; i <= r; ++i)
                    acc += k[static_cast<std::size_t>(i + r)] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Raster resize(const Raster& image, int width, int height, bool antialias)
{
    if (width <= 0 || height <= 0)
        throw Error(ErrorCode::InvalidArgument, "resize target must be positive");
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;
    const double shrink = std::max(sx, sy);
    const Raster src = antialias && shrink > 1.0 ? gaussian_blur(image, 0.5 * shrink) : image;
    Raster out(width, height, image.channels);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            sample_bilinear(src, (x + 0.5) * sx, (y + 0.5) * sy, &out.at(x, y, 0));
    return out;
}

Raster to_gray(const Raster& rgb)
{
    if (rgb.channels == 1)
        return rgb;
    if (rgb.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "grey conversion needs an RGB raster");
    Raster out(rgb.width, rgb.height, 1);
    out.mask = rgb.mask;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = 0.2126f * rgb.data[3 * i] + 0.7152f * rgb.data[3 * i + 1] + 0.0722f * rgb.data[3 * i + 2];
    return out;
}

double psnr(const Raster& a, const Raster& b, const Mask* mask)
{
    if (!a.same_shape(b))
        throw Error(ErrorCode::InvalidArgument, "psnr needs equally shaped images");
    double se = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (mask && !(*mask)(x, y))
                continue;
            for (int c = 0; c < a.channels; ++c) {
                const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
                se += d * d;
                ++n;
            }
        }
    }
    if (n == 0)
        throw Error(ErrorCode::InvalidArgument, "psnr over an empty region");
    if (se == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / (se / static_cast<double>(n)));
}

double laplacian_energy(const Raster& image, const Mask* mask)
{
    const Raster g = to_gray(image);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 1; y + 1 < g.height; ++y) {
        for (int x = 1; x + 1 < g.width; ++x) {
            if (mask && !((*mask)(x, y) && (*mask)(x - 1, y) && (*mask)(x + 1, y) && (*mask)(x, y - 1) && (*mask)(x, y + 1)))
                continue;
            const double l = 4.0 * g.at(x, y) - g.at(x - 1, y) - g.at(x + 1, y) - g.at(x, y - 1) - g.at(x, y + 1);
            sum += l * l;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

Raster crop(const Raster& image, int x0, int y0, int width, int height)
{
    if (x0 < 0 || y0 < 0 || x0 + width > image.width || y0 + height > image.height)
        throw Error(ErrorCode::InvalidArgument, "crop outside image");
    Raster out(width, height, image.channels);
    if (image.has_mask())
        out.mask.resize(out.pixel_count());
    for (int y = 0; y < height; ++y) {
        std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>(image.index(x0, y0 + y) * static_cast<std::size_t>(image.channels)), static_cast<std::size_t>(width) * static_cast<std::size_t>(image.channels),
                    &out.at(0, y, 0));
        if (image.has_mask())
            std::copy_n(&image.mask[image.index(x0, y0 + y)], width, &out.mask[out.index(0, y)]);
    }
    return out;
}

Mask crop(const Mask& mask, int x0, int y0, int width, int height)
{
    if (x0 < 0 || y0 < 0 || x0 + width > mask.width || y0 + height > mask.height)
        throw Error(ErrorCode::InvalidArgument, "crop outside mask");
    Mask out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.set(x, y, mask(x0 + x, y0 + y));
    return out;
}

Mask valid_mask(const Raster& raster)
{
    Mask m(raster.width, raster.height, true);
    if (raster.has_mask())
        for (std::size_t i = 0; i < m.data.size(); ++i)
            m.data[i] = raster.mask[i] ? 1 : 0;
    return m;
}

} // namespace caric
