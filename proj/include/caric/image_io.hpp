#pragma once

#include "caric/raster.hpp"

#include <filesystem>
#include <string>

namespace caric {

float srgb_to_linear(float v);
float linear_to_srgb(float v);

/// Decodes PNG or JPEG bytes (detected by signature) into a 3-channel linear
/// RGB raster in [0, 1]. Grey inputs are replicated, alpha is dropped.
Raster decode_image(const std::string& bytes);
Raster load_image(const std::filesystem::path& path);

enum class Transfer { Srgb, Linear };

/// 8-bit PNG of a 1- or 3-channel raster. Values are clamped to [0, 1];
/// `Srgb` applies the sRGB transfer curve, `Linear` writes values as is
/// (masks and visualizations).
std::string encode_png(const Raster& raster, Transfer transfer = Transfer::Srgb);
void save_png(const std::filesystem::path& path, const Raster& raster, Transfer transfer = Transfer::Srgb);
void save_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask load_mask_png(const std::filesystem::path& path);

} // namespace caric
