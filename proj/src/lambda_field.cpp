#include "caric/lambda_field.hpp"

#include "caric/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace caric {

std::vector<RegionKernel> region_kernels(const FaceMesh& mesh)
{
    const auto neighbors = vertex_neighbors(mesh);
    const int n = mesh.vertex_count();
    std::vector<int> component(static_cast<std::size_t>(n), -1);
    std::vector<RegionKernel> kernels;
    for (int r = 1; r < kRegionCount; ++r) {
        const Region region = static_cast<Region>(r);
        for (int seed = 0; seed < n; ++seed) {
            if (mesh.region_labels[static_cast<std::size_t>(seed)] != region || component[static_cast<std::size_t>(seed)] >= 0)
                continue;
            RegionKernel k;
            k.region = region;
            std::deque<int> queue{seed};
            component[static_cast<std::size_t>(seed)] = static_cast<int>(kernels.size());
            while (!queue.empty()) {
                const int v = queue.front();
                queue.pop_front();
                k.support.push_back(v);
                for (int w : neighbors[static_cast<std::size_t>(v)]) {
                    if (mesh.region_labels[static_cast<std::size_t>(w)] == region && component[static_cast<std::size_t>(w)] < 0) {
                        component[static_cast<std::size_t>(w)] = static_cast<int>(kernels.size());
                        queue.push_back(w);
                    }
                }
            }
            std::sort(k.support.begin(), k.support.end());

            Eigen::RowVector3d centroid = Eigen::RowVector3d::Zero();
            for (int v : k.support)
                centroid += mesh.vertices.row(v);
            centroid /= static_cast<double>(k.support.size());
            double best = std::numeric_limits<double>::infinity();
            for (int v : k.support) {
                const double d = (mesh.vertices.row(v) - centroid).squaredNorm();
                if (d < best) {
                    best = d;
                    k.center = v;
                }
            }
            double radius = 0.0;
            for (int v : k.support)
                radius = std::max(radius, (mesh.vertices.row(v) - mesh.vertices.row(k.center)).norm());
            k.sigma = radius / 2.0;
            kernels.push_back(std::move(k));
        }
    }
    return kernels;
}

Eigen::VectorXd kernel_values(const FaceMesh& mesh, const RegionKernel& kernel)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.vertex_count());
    if (kernel.sigma <= 0.0) {
        out[kernel.center] = 1.0;
        return out;
    }
    const double inv = 1.0 / (2.0 * kernel.sigma * kernel.sigma);
    for (int v : kernel.support)
        out[v] = std::exp(-(mesh.vertices.row(v) - mesh.vertices.row(kernel.center)).squaredNorm() * inv);
    return out;
}

Eigen::VectorXd smooth_field(const FaceMesh& mesh, const Eigen::VectorXd& field, int iterations)
{
    if (field.size() != mesh.vertex_count())
        throw Error(ErrorCode::TopologyMismatch, "field length differs from vertex count");
    const auto neighbors = vertex_neighbors(mesh);
    Eigen::VectorXd x = field;
    Eigen::VectorXd next(x.size());
    for (int it = 0; it < iterations; ++it) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const auto& ring = neighbors[static_cast<std::size_t>(i)];
            if (ring.empty()) {
                next[i] = x[i];
                continue;
            }
            double mean = 0.0;
            for (int j : ring)
                mean += x[j];
            next[i] = 0.5 * (x[i] + mean / static_cast<double>(ring.size()));
        }
        x.swap(next);
    }
    return x;
}

SynthResult synth_exaggeration(const FaceMesh& mesh, std::uint64_t seed, const SynthConfig& config,
                               const LambdaBounds& bounds)
{
    if (config.scale_min > config.scale_max || !bounds.contains(config.scale_min) || !bounds.contains(config.scale_max))
        throw Error(ErrorCode::InvalidArgument, "style scale range must lie inside the lambda bounds");
    if (config.smoothing_iterations < 0 || config.kernels_per_face < 0)
        throw Error(ErrorCode::InvalidArgument, "negative style configuration");

    SynthResult result;
    std::vector<RegionKernel> all = region_kernels(mesh);
    for (int r = 1; r < kRegionCount; ++r) {
        const Region region = static_cast<Region>(r);
        if (std::none_of(all.begin(), all.end(), [&](const RegionKernel& k) { return k.region == region; }))
            result.warnings.push_back("region '" + std::string(region_name(region)) + "' has no vertices");
    }

    std::mt19937_64 rng(seed);
    if (config.kernels_per_face > 0 && config.kernels_per_face < static_cast<int>(all.size())) {
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(static_cast<std::size_t>(config.kernels_per_face));
        std::sort(all.begin(), all.end(), [](const RegionKernel& a, const RegionKernel& b) { return a.center < b.center; });
    }
    std::uniform_real_distribution<double> scale(config.scale_min, config.scale_max);

    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(mesh.vertex_count());
    for (RegionKernel& k : all) {
        k.scale = scale(rng);
        lambda += (k.scale - 1.0) * kernel_values(mesh, k);
    }
    result.unsmoothed = lambda;
    result.lambda.values = smooth_field(mesh, lambda, config.smoothing_iterations);
    result.lambda.topology_id = mesh.topology_id();
    // Kernels have disjoint supports and averaging is convex, so this only
    // guards against rounding at the range ends.
    for (Eigen::Index i = 0; i < result.lambda.values.size(); ++i)
        result.lambda.values[i] = bounds.clamp(result.lambda.values[i]);
    result.kernels = std::move(all);
    return result;
}

LambdaBasis LambdaBasis::build(const FaceMesh& mesh, int smoothing_iterations)
{
    LambdaBasis basis;
    basis.kernels = region_kernels(mesh);
    basis.columns.resize(mesh.vertex_count(), static_cast<Eigen::Index>(basis.kernels.size()));
    for (std::size_t k = 0; k < basis.kernels.size(); ++k)
        basis.columns.col(static_cast<Eigen::Index>(k)) =
            smooth_field(mesh, kernel_values(mesh, basis.kernels[k]), smoothing_iterations);
    return basis;
}

LambdaField LambdaBasis::field(const Eigen::VectorXd& coefficients, std::uint64_t topology) const
{
    if (coefficients.size() != columns.cols())
        throw Error(ErrorCode::InvalidArgument, "coefficient count differs from basis size");
    LambdaField f;
    f.values = Eigen::VectorXd::Ones(columns.rows()) + columns * coefficients;
    f.topology_id = topology;
    return f;
}

ViewObservation observe(const FaceMesh& mesh, const Camera& camera, const SketchSet& edited, int stations)
{
    const SketchSet base = project_curves(mesh, camera);
    ViewObservation obs;
    obs.camera = camera;
    obs.params = curve_params(base);
    SketchSet touched;
    touched.view = base.view;
    for (const auto& [name, curve] : edited.curves)
        touched.curves.emplace(name, base.curve(name));
    obs.displacements = correspondence_displacements(touched, edited, stations);
    return obs;
}

namespace {

// Station rows of one view: projected position = offset + response * c.
struct StationBlock {
    Eigen::VectorXd offset;
    Eigen::MatrixXd response;
    Eigen::VectorXd target;
};

} // namespace

EstimateResult estimate_lambda(const FaceMesh& mesh, const std::vector<ViewObservation>& views,
                               const SolverContext& context, const LambdaBasis& basis,
                               const EstimatorOptions& options, const LambdaBounds& bounds)
{
    const std::uint64_t topology = mesh.topology_id();
    if (context.topology_id() != topology)
        throw Error(ErrorCode::TopologyMismatch, "solver context belongs to another topology");
    if (basis.columns.rows() != mesh.vertex_count())
        throw Error(ErrorCode::TopologyMismatch, "lambda basis belongs to another topology");
    if (options.max_iterations < 1 || options.mu < 0.0 || options.fd_step <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "invalid estimator options");

    const Eigen::Index kcount = basis.columns.cols();

    // Exaggeration is linear in lambda: x(c) = x(0) + sum_k c_k F^-1 L^T diag(B_k) L x.
    // x(0) is the mesh itself (lambda = 1 reproduces every Laplacian and anchor).
    const Eigen::MatrixX3d deltas = context.laplacian() * mesh.vertices;
    std::vector<Eigen::MatrixX3d> responses;
    responses.reserve(static_cast<std::size_t>(kcount));
    const Eigen::MatrixX3d zero = Eigen::MatrixX3d::Zero(mesh.vertex_count(), 3);
    for (Eigen::Index k = 0; k < kcount; ++k) {
        const Eigen::MatrixX3d scaled = basis.columns.col(k).asDiagonal() * deltas;
        Eigen::MatrixX3d rhs = context.laplacian().transpose() * scaled;
        responses.push_back(context.solve(rhs));
    }

    std::vector<StationBlock> blocks;
    for (const ViewObservation& view : views) {
        view.camera.validate();
        const auto lin = view.camera.linear();
        std::vector<StationSample> samples;
        std::vector<Eigen::Vector2d> disp;
        for (const auto& [name, d] : view.displacements.curves) {
            const auto path = mesh.feature_curves.find(name);
            if (path == mesh.feature_curves.end())
                throw Error(ErrorCode::MissingCurve, "mesh has no feature curve '" + name + "'");
            const auto p = view.params.find(name);
            if (p == view.params.end())
                throw Error(ErrorCode::MissingCurve, "no station parameters for curve '" + name + "'");
            const auto s = locate_stations(path->second, p->second, view.displacements.stations);
            if (s.size() != d.size())
                throw Error(ErrorCode::InvalidArgument, "displacement count differs from station count for '" + name + "'");
            samples.insert(samples.end(), s.begin(), s.end());
            disp.insert(disp.end(), d.begin(), d.end());
        }
        const Eigen::Index m = static_cast<Eigen::Index>(samples.size());
        StationBlock block;
        block.offset.resize(2 * m);
        block.target.resize(2 * m);
        block.response.resize(2 * m, kcount);
        for (Eigen::Index i = 0; i < m; ++i) {
            const StationSample& s = samples[static_cast<std::size_t>(i)];
            const Eigen::Vector3d x0 = (1.0 - s.w) * mesh.vertices.row(s.a).transpose() + s.w * mesh.vertices.row(s.b).transpose();
            const Eigen::Vector2d p0 = view.camera.project(x0);
            block.offset.segment<2>(2 * i) = p0;
            block.target.segment<2>(2 * i) = p0 + disp[static_cast<std::size_t>(i)];
            for (Eigen::Index k = 0; k < kcount; ++k) {
                const auto& u = responses[static_cast<std::size_t>(k)];
                const Eigen::Vector3d du = (1.0 - s.w) * u.row(s.a).transpose() + s.w * u.row(s.b).transpose();
                block.response.block<2, 1>(2 * i, k) = lin * du;
            }
        }
        blocks.push_back(std::move(block));
    }

    Eigen::Index rows = 0;
    for (const auto& b : blocks)
        rows += b.offset.size();

    auto residual = [&](const Eigen::VectorXd& c) {
        Eigen::VectorXd r(rows);
        Eigen::Index at = 0;
        for (const auto& b : blocks) {
            r.segment(at, b.offset.size()) = b.offset + b.response * c - b.target;
            at += b.offset.size();
        }
        return r;
    };
    auto objective = [&](const Eigen::VectorXd& c, const Eigen::VectorXd& r) {
        return r.squaredNorm() + options.mu * c.squaredNorm();
    };
    auto feasible = [&](const Eigen::VectorXd& c) {
        const Eigen::VectorXd lambda = Eigen::VectorXd::Ones(basis.columns.rows()) + basis.columns * c;
        return lambda.minCoeff() >= bounds.min && lambda.maxCoeff() <= bounds.max;
    };

    EstimateResult result;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(kcount);
    Eigen::VectorXd r = residual(c);
    double f = objective(c, r);
    result.residual_at_identity = r.squaredNorm();
    result.objective_history.push_back(f);

    for (int it = 0; it < options.max_iterations && kcount > 0 && rows > 0; ++it) {
        Eigen::MatrixXd jac(rows, kcount);
        for (Eigen::Index k = 0; k < kcount; ++k) {
            Eigen::VectorXd probe = c;
            probe[k] += options.fd_step;
            jac.col(k) = (residual(probe) - r) / options.fd_step;
        }
        Eigen::MatrixXd normal = jac.transpose() * jac;
        normal.diagonal().array() += options.mu;
        const Eigen::VectorXd gradient = jac.transpose() * r + options.mu * c;
        const Eigen::VectorXd step = -normal.ldlt().solve(gradient);
        if (!step.allFinite())
            throw Error(ErrorCode::NonFinite, "lambda estimator step is not finite");

        double alpha = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
            const Eigen::VectorXd trial = c + alpha * step;
            if (!feasible(trial))
                continue;
            const Eigen::VectorXd tr = residual(trial);
            const double tf = objective(trial, tr);
            if (tf <= f) {
                const double decrease = f - tf;
                c = trial;
                r = tr;
                f = tf;
                accepted = true;
                result.objective_history.push_back(f);
                result.iterations = it + 1;
                if (decrease <= options.tolerance * std::max(1.0, result.objective_history.front()))
                    result.converged = true;
                break;
            }
        }
        if (!accepted) {
            // No feasible descent along the step: stationary up to the bounds.
            result.converged = step.norm() * alpha < 1e-9;
            break;
        }
        if (result.converged)
            break;
    }
    if (kcount == 0 || rows == 0)
        result.converged = true;

    result.coefficients = c;
    result.lambda = basis.field(c, topology);
    for (Eigen::Index i = 0; i < result.lambda.values.size(); ++i)
        result.lambda.values[i] = bounds.clamp(result.lambda.values[i]);
    result.residual = r.squaredNorm();
    return result;
}

} // namespace caric
