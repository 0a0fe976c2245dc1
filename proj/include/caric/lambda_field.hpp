#pragma once

#include "caric/exaggeration.hpp"
#include "caric/sketch.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace caric {

/// Gaussian bump over one connected component of a semantic region.
struct RegionKernel {
    Region region = Region::Other;
    int center = 0;
    double sigma = 1.0;       // model units, Euclidean
    double scale = 1.0;       // lambda at the centre before smoothing
    std::vector<int> support; // vertices of the component
};

/// One kernel per connected component of every labelled region ("other"
/// excluded): centre = vertex nearest the component centroid, sigma = half
/// the largest centre-to-vertex distance. Scales are left at 1.
std::vector<RegionKernel> region_kernels(const FaceMesh& mesh);

/// exp(-|v - c|^2 / (2 sigma^2)) on the kernel support, 0 elsewhere.
/// sigma == 0 gives an indicator of the centre vertex.
Eigen::VectorXd kernel_values(const FaceMesh& mesh, const RegionKernel& kernel);

/// k rounds of lazy neighbour averaging: x_i <- (x_i + mean_{N(i)} x) / 2.
Eigen::VectorXd smooth_field(const FaceMesh& mesh, const Eigen::VectorXd& field, int iterations);

struct SynthConfig {
    int kernels_per_face = 0; // 0 uses every region kernel
    double scale_min = 0.5;
    double scale_max = 2.5;
    int smoothing_iterations = 10;
};

struct SynthResult {
    LambdaField lambda;
    Eigen::VectorXd unsmoothed;
    std::vector<RegionKernel> kernels;
    std::vector<std::string> warnings;
};

/// Random exaggeration style: each chosen kernel gets a uniform random scale
/// s and contributes (s - 1) * kernel; the sum plus one is smoothed.
SynthResult synth_exaggeration(const FaceMesh& mesh, std::uint64_t seed, const SynthConfig& config = {},
                               const LambdaBounds& bounds = {});

/// Smoothed kernels as columns; lambda = 1 + basis * c.
struct LambdaBasis {
    std::vector<RegionKernel> kernels;
    Eigen::MatrixXd columns;

    static LambdaBasis build(const FaceMesh& mesh, int smoothing_iterations = 10);
    LambdaField field(const Eigen::VectorXd& coefficients, std::uint64_t topology) const;
};

/// Sketch evidence from one view: station displacements of the edited sketch
/// relative to the projection of the mesh being exaggerated.
struct ViewObservation {
    Camera camera;
    CurveParams params;
    DisplacementSet displacements;
};

/// Observation of an edited sketch against the mesh's own projection. The
/// base parameters come from the fresh projection; `edited` must keep the
/// point parameters produced by apply_edit.
ViewObservation observe(const FaceMesh& mesh, const Camera& camera, const SketchSet& edited, int stations = 64);

struct EstimatorOptions {
    double mu = 1e-2;
    int max_iterations = 20;
    double fd_step = 1e-4;
    double tolerance = 1e-10; // relative objective decrease that counts as converged
};

struct EstimateResult {
    LambdaField lambda;
    Eigen::VectorXd coefficients;
    std::vector<double> objective_history; // accepted iterates, starting at c = 0
    double residual_at_identity = 0.0;     // sum of squared station residuals, lambda = 1
    double residual = 0.0;                 // same at the returned field
    int iterations = 0;
    bool converged = false;
};

/// Fits lambda = 1 + sum_k c_k K_k so that stations of exaggerate(mesh, lambda)
/// move by the observed displacements: Gauss-Newton with a finite-difference
/// Jacobian, step backtracking that keeps lambda within bounds and the
/// objective from increasing, returning the best iterate.
EstimateResult estimate_lambda(const FaceMesh& mesh, const std::vector<ViewObservation>& views,
                               const SolverContext& context, const LambdaBasis& basis,
                               const EstimatorOptions& options = {}, const LambdaBounds& bounds = {});

} // namespace caric
