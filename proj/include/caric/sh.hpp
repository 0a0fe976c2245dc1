#pragma once

#include <Eigen/Core>

#include <array>

namespace caric {

/// Real spherical harmonics up to order 2 at a unit normal, in the order
/// (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2).
Eigen::Matrix<double, 9, 1> sh_basis(const Eigen::Vector3d& n);

/// Grey-scale irradiance as a 9-coefficient SH expansion.
struct SHLighting {
    Eigen::Matrix<double, 9, 1> coeffs = Eigen::Matrix<double, 9, 1>::Zero();

    double eval(const Eigen::Vector3d& n) const { return coeffs.dot(sh_basis(n)); }
    /// Mean of L over `samples` quasi-uniform unit normals.
    double mean_radiance(int samples = 1000) const;
    bool valid() const;
};

/// Quasi-uniform unit vectors (Fibonacci sphere).
std::vector<Eigen::Vector3d> sphere_directions(int count);

} // namespace caric
