#include "caric/image_io.hpp"

#include "caric/error.hpp"
#include "caric/mesh_io.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

namespace caric {

namespace {

const std::array<float, 256>& srgb_table()
{
    static const std::array<float, 256> table = [] {
        std::array<float, 256> t{};
        for (int i = 0; i < 256; ++i)
            t[static_cast<std::size_t>(i)] = srgb_to_linear(static_cast<float>(i) / 255.0f);
        return t;
    }();
    return table;
}

struct PngReadState {
    const std::string* bytes;
    std::size_t pos;
};

void png_read_from_string(png_structp png, png_bytep out, png_size_t n)
{
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + n > st->bytes->size())
        png_error(png, "truncated png");
    std::memcpy(out, st->bytes->data() + st->pos, n);
    st->pos += n;
}

void png_write_to_string(png_structp png, png_bytep data, png_size_t n)
{
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_noop(png_structp) {}

struct PngError {
    char message[256] = {};
};

void png_fail(png_structp png, png_const_charp msg)
{
    auto* err = static_cast<PngError*>(png_get_error_ptr(png));
    std::snprintf(err->message, sizeof(err->message), "%s", msg);
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// All C++ objects live before setjmp so a longjmp back here skips no
// destructors.
Raster decode_png(const std::string& bytes, bool apply_srgb)
{
    PngError err;
    PngReadState state{&bytes, 0};
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    int w = 0, h = 0;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, std::string("png: ") + err.message);
    }
    png_set_read_fn(png, &state, png_read_from_string);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3)
        png_error(png, "unexpected png layout");
    pixels.resize(static_cast<std::size_t>(w) * 3 * static_cast<std::size_t>(h));
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(w) * 3 * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Raster out(w, h, 3);
    const auto& table = srgb_table();
    for (std::size_t i = 0; i < pixels.size(); ++i)
        out.data[i] = apply_srgb ? table[pixels[i]] : static_cast<float>(pixels[i]) / 255.0f;
    return out;
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Raster decode_jpeg(const std::string& bytes)
{
    jpeg_decompress_struct cinfo;
    JpegError err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_fail;
    std::vector<unsigned char> pixels;
    int w = 0, h = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorCode::Io, std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * static_cast<std::size_t>(w) * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    Raster out(w, h, 3);
    const auto& table = srgb_table();
    for (std::size_t i = 0; i < pixels.size(); ++i)
        out.data[i] = table[pixels[i]];
    return out;
}

} // namespace

float srgb_to_linear(float v)
{
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb(float v)
{
    v = std::clamp(v, 0.0f, 1.0f);
    return v <= 0.0031308f ? 12.92f * v : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

Raster decode_image(const std::string& bytes)
{
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0)
        return decode_png(bytes, true);
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xff && static_cast<unsigned char>(bytes[1]) == 0xd8)
        return decode_jpeg(bytes);
    throw Error(ErrorCode::Io, "unrecognized image format (expected PNG or JPEG)");
}

Raster load_image(const std::filesystem::path& path)
{
    return decode_image(read_text_file(path));
}

std::string encode_png(const Raster& raster, Transfer transfer)
{
    if (raster.channels != 1 && raster.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "png export needs 1 or 3 channels");
    if (raster.empty())
        throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
    std::vector<unsigned char> pixels(raster.data.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        float v = std::isfinite(raster.data[i]) ? raster.data[i] : 0.0f;
        v = transfer == Transfer::Srgb ? linear_to_srgb(v) : std::clamp(v, 0.0f, 1.0f);
        pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    std::string out;
    PngError err;
    const std::size_t stride = static_cast<std::size_t>(raster.width) * static_cast<std::size_t>(raster.channels);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, std::string("png: ") + err.message);
    }
    png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
                 raster.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 3);
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y)
        png_write_row(png, pixels.data() + stride * static_cast<std::size_t>(y));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void save_png(const std::filesystem::path& path, const Raster& raster, Transfer transfer)
{
    write_text_file(path, encode_png(raster, transfer));
}

void save_mask_png(const std::filesystem::path& path, const Mask& mask)
{
    Raster r(mask.width, mask.height, 1);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        r.data[i] = mask.data[i] ? 1.0f : 0.0f;
    save_png(path, r, Transfer::Linear);
}

Mask load_mask_png(const std::filesystem::path& path)
{
    const Raster r = decode_png(read_text_file(path), false);
    Mask m(r.width, r.height);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = r.data[3 * i] > 0.5f ? 1 : 0;
    return m;
}

} // namespace caric
