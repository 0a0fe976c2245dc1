#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace caric {

/// Row-major, channel-interleaved float grid with an optional validity mask.
/// Used for photos (linear RGB), single-channel maps and parametric rasters.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;
    std::vector<std::uint8_t> mask; // empty means every pixel is valid

    Raster() = default;
    Raster(int w, int h, int c, float fill = 0.0f);

    bool empty() const { return width == 0 || height == 0; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool has_mask() const { return !mask.empty(); }
    bool valid(int x, int y) const { return mask.empty() || mask[index(x, y)] != 0; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x); }

    float& at(int x, int y, int c = 0) { return data[index(x, y) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)]; }
    float at(int x, int y, int c = 0) const { return data[index(x, y) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)]; }

    bool same_shape(const Raster& other) const
    {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

/// Binary per-pixel mask.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, bool value = false)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), value ? 1 : 0)
    {
    }

    bool operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] != 0; }
    void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = v ? 1 : 0; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::size_t count() const;
    bool any() const { return count() > 0; }
};

Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_not(const Mask& a);
Mask erode(const Mask& m, int radius);  // 4-connected steps
Mask dilate(const Mask& m, int radius); // 4-connected steps

// Binary container: "CRST", u32 version, u32 width, u32 height, u32 channels,
// u8 has_mask, [mask bytes], float32 data. All little endian.
std::string encode_raster(const Raster& raster);
Raster decode_raster(const std::string& bytes);
void write_raster(const std::filesystem::path& path, const Raster& raster);
Raster read_raster(const std::filesystem::path& path);

// Named set of rasters in one payload: "CRSB", u32 count, then per entry
// u32 name length, name, u64 byte length, raster container.
std::string encode_bundle(const std::map<std::string, Raster>& rasters);
std::map<std::string, Raster> decode_bundle(const std::string& bytes);

} // namespace caric
