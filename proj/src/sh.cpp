#include "caric/sh.hpp"

#include <cmath>
#include <vector>

namespace caric {

Eigen::Matrix<double, 9, 1> sh_basis(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    Eigen::Matrix<double, 9, 1> b;
    b << 0.282094791773878,
        0.488602511902920 * y,
        0.488602511902920 * z,
        0.488602511902920 * x,
        1.092548430592079 * x * y,
        1.092548430592079 * y * z,
        0.315391565252520 * (3.0 * z * z - 1.0),
        1.092548430592079 * x * z,
        0.546274215296040 * (x * x - y * y);
    return b;
}

std::vector<Eigen::Vector3d> sphere_directions(int count)
{
    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    return dirs;
}

double SHLighting::mean_radiance(int samples) const
{
    double sum = 0.0;
    for (const auto& d : sphere_directions(samples))
        sum += eval(d);
    return sum / samples;
}

bool SHLighting::valid() const
{
    return coeffs.allFinite() && mean_radiance() > 0.0;
}

} // namespace caric
