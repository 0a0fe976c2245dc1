#include "caric/raster.hpp"

#include "caric/error.hpp"
#include "caric/mesh_io.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

namespace caric {

namespace {

constexpr char kRasterMagic[4] = {'C', 'R', 'S', 'T'};
constexpr char kBundleMagic[4] = {'C', 'R', 'S', 'B'};
constexpr std::uint32_t kVersion = 1;

static_assert(sizeof(float) == 4, "container stores IEEE float32");

template <class T>
void put(std::string& out, T value)
{
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    // Host is assumed little endian (x86/ARM); checked once at startup below.
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <class T>
    T get()
    {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string take(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw Error(ErrorCode::Io, "truncated raster payload");
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

bool little_endian()
{
    const std::uint32_t probe = 1;
    unsigned char first;
    std::memcpy(&first, &probe, 1);
    return first == 1;
}

Mask grow(const Mask& m, int radius, bool value)
{
    // Multi-source BFS distance (4-connected) from pixels whose value differs.
    Mask out = m;
    std::vector<int> dist(m.data.size(), -1);
    std::deque<int> queue;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m(x, y) == value) {
                dist[static_cast<std::size_t>(y * m.width + x)] = 0;
                queue.push_back(y * m.width + x);
            }
    while (!queue.empty()) {
        const int p = queue.front();
        queue.pop_front();
        const int d = dist[static_cast<std::size_t>(p)];
        if (d == radius)
            continue;
        const int x = p % m.width, y = p / m.width;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
            if (!m.inside(nx[k], ny[k]))
                continue;
            const int q = ny[k] * m.width + nx[k];
            if (dist[static_cast<std::size_t>(q)] >= 0)
                continue;
            dist[static_cast<std::size_t>(q)] = d + 1;
            out.data[static_cast<std::size_t>(q)] = value ? 1 : 0;
            queue.push_back(q);
        }
    }
    return out;
}

} // namespace

Raster::Raster(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill)
{
    if (w < 0 || h < 0 || c < 0)
        throw Error(ErrorCode::InvalidArgument, "raster dimensions must be non-negative");
}

std::size_t Mask::count() const
{
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask mask_and(const Mask& a, const Mask& b)
{
    Mask out(a.width, a.height);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
    return out;
}

Mask mask_or(const Mask& a, const Mask& b)
{
    Mask out(a.width, a.height);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
    return out;
}

Mask mask_not(const Mask& a)
{
    Mask out(a.width, a.height);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a.data[i] ? 0 : 1;
    return out;
}

Mask erode(const Mask& m, int radius)
{
    return grow(m, radius, false);
}

Mask dilate(const Mask& m, int radius)
{
    return grow(m, radius, true);
}

std::string encode_raster(const Raster& r)
{
    if (!little_endian())
        throw Error(ErrorCode::Io, "raster container requires a little-endian host");
    if (r.data.size() != r.pixel_count() * static_cast<std::size_t>(r.channels))
        throw Error(ErrorCode::InvalidArgument, "raster data size does not match its shape");
    std::string out(kRasterMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.height));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.channels));
    put<std::uint8_t>(out, r.has_mask() ? 1 : 0);
    if (r.has_mask())
        out.append(reinterpret_cast<const char*>(r.mask.data()), r.mask.size());
    out.append(reinterpret_cast<const char*>(r.data.data()), r.data.size() * sizeof(float));
    return out;
}

Raster decode_raster(const std::string& bytes)
{
    Reader in(bytes);
    if (in.take(4) != std::string(kRasterMagic, 4))
        throw Error(ErrorCode::Io, "not a raster container");
    if (in.get<std::uint32_t>() != kVersion)
        throw Error(ErrorCode::Io, "unsupported raster container version");
    const auto w = in.get<std::uint32_t>();
    const auto h = in.get<std::uint32_t>();
    const auto c = in.get<std::uint32_t>();
    if (w > 1u << 15 || h > 1u << 15 || c > 64)
        throw Error(ErrorCode::Io, "raster dimensions out of range");
    Raster r(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
    if (in.get<std::uint8_t>()) {
        const std::string m = in.take(r.pixel_count());
        r.mask.assign(m.begin(), m.end());
    }
    const std::string d = in.take(r.data.size() * sizeof(float));
    std::memcpy(r.data.data(), d.data(), d.size());
    if (!in.done())
        throw Error(ErrorCode::Io, "trailing bytes after raster payload");
    return r;
}

void write_raster(const std::filesystem::path& path, const Raster& raster)
{
    write_text_file(path, encode_raster(raster));
}

Raster read_raster(const std::filesystem::path& path)
{
    return decode_raster(read_text_file(path));
}

std::string encode_bundle(const std::map<std::string, Raster>& rasters)
{
    std::string out(kBundleMagic, 4);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rasters.size()));
    for (const auto& [name, raster] : rasters) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        const std::string body = encode_raster(raster);
        put<std::uint64_t>(out, body.size());
        out += body;
    }
    return out;
}

std::map<std::string, Raster> decode_bundle(const std::string& bytes)
{
    Reader in(bytes);
    if (in.take(4) != std::string(kBundleMagic, 4))
        throw Error(ErrorCode::Io, "not a raster bundle");
    const auto count = in.get<std::uint32_t>();
    std::map<std::string, Raster> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = in.get<std::uint32_t>();
        std::string name = in.take(len);
        const auto size = in.get<std::uint64_t>();
        out.emplace(std::move(name), decode_raster(in.take(static_cast<std::size_t>(size))));
    }
    if (!in.done())
        throw Error(ErrorCode::Io, "trailing bytes after raster bundle");
    return out;
}

} // namespace caric
