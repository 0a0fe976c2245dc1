#pragma once

#include "caric/raster.hpp"

#include <optional>

namespace caric {

/// Continuous image coordinates put pixel (x, y)'s centre at (x + 0.5, y + 0.5).
/// Bilinear sampling clamps to the border.
float sample_bilinear(const Raster& image, double x, double y, int channel);
void sample_bilinear(const Raster& image, double x, double y, float* out);

Raster gaussian_blur(const Raster& image, double sigma);

/// Bilinear resampling to a new size; `antialias` pre-blurs when shrinking.
Raster resize(const Raster& image, int width, int height, bool antialias = true);

Raster to_gray(const Raster& rgb);

/// Peak signal-to-noise ratio in dB for values in [0, 1], optionally only over
/// a mask. Identical inputs give +infinity.
double psnr(const Raster& a, const Raster& b, const Mask* mask = nullptr);

/// Mean squared 5-point Laplacian of the grey image over interior pixels of
/// the mask (or everywhere).
double laplacian_energy(const Raster& image, const Mask* mask = nullptr);

Raster crop(const Raster& image, int x0, int y0, int width, int height);
Mask crop(const Mask& mask, int x0, int y0, int width, int height);

/// Pixels where the raster mask is set (or all pixels when it has none).
Mask valid_mask(const Raster& raster);

} // namespace caric
