#include <doctest.h>

#include "caric/deformation_transfer.hpp"
#include "caric/error.hpp"
#include "caric/exaggeration.hpp"
#include "caric/mesh_io.hpp"
#include "caric/synthetic.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <random>

using namespace caric;

namespace {

FaceMesh hexagon_fan()
{
    FaceMesh mesh;
    mesh.vertices.resize(7, 3);
    mesh.vertices.row(0) << 0, 0, 0;
    for (int k = 0; k < 6; ++k)
        mesh.vertices.row(k + 1) << std::cos(k * M_PI / 3), std::sin(k * M_PI / 3), 0;
    mesh.triangles.resize(6, 3);
    for (int k = 0; k < 6; ++k)
        mesh.triangles.row(k) << 0, 1 + k, 1 + (k + 1) % 6;
    mesh.region_labels.assign(7, Region::Other);
    mesh.anchors = {1};
    return mesh;
}

FaceMesh tetrahedron()
{
    FaceMesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 1, 0, 0, -0.5, std::sqrt(3.0) / 2, 0, -0.5, -std::sqrt(3.0) / 2, 0, 0.2, 0.1, 1.5;
    mesh.triangles.resize(4, 3);
    mesh.triangles << 0, 2, 1, 0, 1, 3, 1, 2, 3, 2, 0, 3;
    mesh.region_labels.assign(4, Region::Other);
    mesh.anchors = {0};
    return mesh;
}

FaceMesh small_face()
{
    FaceShapeParams p;
    p.rows = 24;
    p.cols = 24;
    return make_face_mesh(p);
}

} // namespace

TEST_CASE("laplacian of a planar symmetric fan centre is zero")
{
    const auto set = compute_laplacians(hexagon_fan());
    CHECK(set.deltas.row(0).norm() < 1e-15);
    CHECK(set.weighting == LaplacianWeighting::Uniform);
}

TEST_CASE("tetrahedron apex laplacian is apex minus base centroid")
{
    const FaceMesh mesh = tetrahedron();
    const auto set = compute_laplacians(mesh);
    const Eigen::RowVector3d base = (mesh.vertices.row(0) + mesh.vertices.row(1) + mesh.vertices.row(2)) / 3.0;
    CHECK((set.deltas.row(3) - (mesh.vertices.row(3) - base)).norm() < 1e-14);
}

TEST_CASE("sparse laplacian equals dense brute-force assembly")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const FaceMesh mesh = oracle::random_closed_mesh(rng, 100);
        const Eigen::MatrixXd dense = oracle::dense_laplacian(mesh) * mesh.vertices;
        const auto set = compute_laplacians(mesh);
        CHECK(oracle::max_abs(set.deltas - dense) < 1e-12);
        CHECK((set.deltas.colwise().sum() - dense.colwise().sum()).norm() < 1e-12);
    }
}

TEST_CASE("isolated vertex is rejected")
{
    FaceMesh mesh = tetrahedron();
    mesh.vertices.conservativeResize(5, 3);
    mesh.vertices.row(4) << 3, 3, 3;
    mesh.region_labels.push_back(Region::Other);
    CHECK_THROWS_AS(compute_laplacians(mesh), Error);
    CHECK_THROWS_AS(mesh.validate(), Error);
}

TEST_CASE("prefactor is deterministic and reusable")
{
    const FaceMesh mesh = make_uv_sphere(3, 6);
    SolverCache cache;
    auto a = cache.get(mesh);
    auto b = cache.get(mesh.with_vertices(mesh.vertices * 3.0));
    CHECK(a == b);
    CHECK(cache.size() == 1);
    CHECK(a->topology_id() == mesh.topology_id());
}

TEST_CASE("20-vertex sphere factor solves against dense oracle")
{
    const FaceMesh mesh = make_uv_sphere(3, 6);
    REQUIRE(mesh.vertex_count() == 20);
    const auto ctx = SolverContext::prefactor(mesh, 1.0);
    const Eigen::MatrixXd lap = oracle::dense_laplacian(mesh);
    Eigen::MatrixXd normal = lap.transpose() * lap;
    for (int a : mesh.anchors)
        normal(a, a) += 1.0;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd rhs(20, 3);
    for (int i = 0; i < rhs.size(); ++i)
        rhs.data()[i] = g(rng);
    const Eigen::MatrixXd x = ctx->solve(rhs);
    CHECK(oracle::max_abs(normal * x - rhs) < 1e-8);
    CHECK(oracle::max_abs(x - normal.fullPivLu().solve(rhs)) < 1e-8);
}

TEST_CASE("empty anchors and bad weights are rejected")
{
    FaceMesh mesh = make_uv_sphere(3, 6);
    CHECK_THROWS_AS(SolverContext::prefactor(mesh, 0.0), Error);
    mesh.anchors.clear();
    try {
        SolverContext::prefactor(mesh, 1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularSystem);
    }
}

TEST_CASE("lambda one reproduces the input")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const FaceMesh mesh = oracle::random_closed_mesh(rng, 200);
        const auto ctx = SolverContext::prefactor(mesh);
        const FaceMesh out = exaggerate(mesh, LambdaField::constant(mesh, 1.0), *ctx);
        CHECK(oracle::max_abs(out.vertices - mesh.vertices) / bounding_box_diagonal(mesh.vertices) < 1e-6);
    }
    const FaceMesh face = small_face();
    const auto ctx = SolverContext::prefactor(face);
    const FaceMesh out = exaggerate(face, LambdaField::constant(face, 1.0), *ctx);
    CHECK(oracle::max_abs(out.vertices - face.vertices) / bounding_box_diagonal(face.vertices) < 1e-6);
}

TEST_CASE("lambda two inflates a sphere and matches the dense oracle")
{
    const FaceMesh mesh = make_icosphere(2);
    REQUIRE(mesh.anchors.size() == 6);
    const auto ctx = SolverContext::prefactor(mesh);
    const LambdaField lambda = LambdaField::constant(mesh, 2.0);
    const FaceMesh out = exaggerate(mesh, lambda, *ctx);
    const Eigen::MatrixXd ref = oracle::dense_exaggerate(mesh, lambda.values, 1.0);
    CHECK(oracle::max_abs(out.vertices - ref) / oracle::max_abs(ref) < 1e-6);
    double mean_before = 0, mean_after = 0;
    int free_count = 0;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        if (std::find(mesh.anchors.begin(), mesh.anchors.end(), v) != mesh.anchors.end())
            continue;
        mean_before += mesh.vertices.row(v).norm();
        mean_after += out.vertices.row(v).norm();
        ++free_count;
    }
    CHECK(mean_after / free_count > mean_before / free_count);
}

TEST_CASE("nose bump moves the nose most")
{
    const FaceMesh face = small_face();
    const auto ctx = SolverContext::prefactor(face);
    const auto nose = vertices_in_region(face, Region::Nose);
    REQUIRE(!nose.empty());
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int v : nose)
        center += face.vertices.row(v).transpose();
    center /= static_cast<double>(nose.size());
    LambdaField lambda = LambdaField::constant(face, 1.0);
    for (int v = 0; v < face.vertex_count(); ++v) {
        if (face.region_labels[static_cast<std::size_t>(v)] == Region::Nose)
            lambda.values[v] = 1.0 + 1.5 * std::exp(-(face.vertices.row(v).transpose() - center).squaredNorm() / 0.05);
    }
    const FaceMesh out = exaggerate(face, lambda, *ctx);
    const Eigen::MatrixXd ref = oracle::dense_exaggerate(face, lambda.values, 1.0);
    CHECK(oracle::max_abs(out.vertices - ref) / oracle::max_abs(ref) < 1e-6);
    Eigen::Index arg = 0;
    (ref - face.vertices).rowwise().norm().maxCoeff(&arg);
    CHECK(face.region_labels[static_cast<std::size_t>(arg)] == Region::Nose);
}

TEST_CASE("sparse solve matches dense oracle for random lambda fields")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    for (int trial = 0; trial < 5; ++trial) {
        const FaceMesh mesh = oracle::random_closed_mesh(rng, 500);
        const auto ctx = SolverContext::prefactor(mesh);
        for (int k = 0; k < 20; ++k) {
            LambdaField lambda = LambdaField::constant(mesh, 1.0);
            for (int v = 0; v < mesh.vertex_count(); ++v)
                lambda.values[v] = u(rng);
            const FaceMesh out = exaggerate(mesh, lambda, *ctx);
            const Eigen::MatrixXd ref = oracle::dense_exaggerate(mesh, lambda.values, 1.0);
            CHECK(oracle::max_abs(out.vertices - ref) / oracle::max_abs(ref) < 1e-6);
        }
    }
}

TEST_CASE("exaggeration is scale equivariant and deterministic")
{
    std::mt19937_64 rng(9);
    const FaceMesh mesh = oracle::random_closed_mesh(rng, 200);
    const auto ctx = SolverContext::prefactor(mesh);
    LambdaField lambda = LambdaField::constant(mesh, 1.0);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int v = 0; v < mesh.vertex_count(); ++v)
        lambda.values[v] = u(rng);
    const FaceMesh a = exaggerate(mesh, lambda, *ctx);
    const FaceMesh b = exaggerate(mesh.with_vertices(3.5 * mesh.vertices), lambda, *ctx);
    CHECK(oracle::max_abs(b.vertices - 3.5 * a.vertices) / oracle::max_abs(b.vertices) < 1e-6);
    const FaceMesh c = exaggerate(mesh, lambda, *ctx);
    CHECK((a.vertices.array() == c.vertices.array()).all());
}

TEST_CASE("exaggerate rejects bad fields")
{
    const FaceMesh mesh = make_uv_sphere(3, 6);
    const auto ctx = SolverContext::prefactor(mesh);
    LambdaField lambda = LambdaField::constant(mesh, 1.0);
    lambda.values[3] = 7.0;
    CHECK_THROWS_AS(exaggerate(mesh, lambda, *ctx), Error);
    const FaceMesh other = make_uv_sphere(4, 6);
    CHECK_THROWS_AS(exaggerate(other, LambdaField::constant(other, 1.0), *ctx), Error);
}

TEST_CASE("deformation transfer: identity and translation")
{
    const FaceMesh face = small_face();
    FaceShapeParams p;
    p.rows = 24;
    p.cols = 24;
    p.nose = 0.45;
    p.seed = 4;
    const FaceMesh target = make_face_mesh(p);
    const FaceMesh same = deformation_transfer(face, face, target);
    CHECK(oracle::max_abs(same.vertices - target.vertices) < 1e-6);
    const FaceMesh moved = face.with_vertices(face.vertices.rowwise() + Eigen::RowVector3d(0.3, -2.0, 5.0));
    const FaceMesh shifted = deformation_transfer(face, moved, target);
    CHECK(oracle::max_abs(shifted.vertices - target.vertices) < 1e-6);
}

TEST_CASE("deformation transfer of a uniform scale on a two-triangle patch")
{
    FaceMesh src;
    src.vertices.resize(4, 3);
    src.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0.2;
    src.triangles.resize(2, 3);
    src.triangles << 0, 1, 2, 2, 1, 3;
    src.region_labels.assign(4, Region::Other);
    src.anchors = {0};
    const double s = 1.7;
    const FaceMesh expr = src.with_vertices(s * src.vertices);
    FaceMesh target = src;
    target.vertices << 0.1, 0.2, 0, 1.3, 0.1, 0.1, -0.1, 0.9, 0.2, 1.1, 1.2, 0.6;
    const FaceMesh out = deformation_transfer(src, expr, target);
    for (int t = 0; t < 2; ++t) {
        for (int k = 1; k < 3; ++k) {
            const Eigen::RowVector3d before = target.vertices.row(target.triangles(t, k)) - target.vertices.row(target.triangles(t, 0));
            const Eigen::RowVector3d after = out.vertices.row(target.triangles(t, k)) - out.vertices.row(target.triangles(t, 0));
            CHECK((after - s * before).norm() < 1e-8);
        }
    }
}

TEST_CASE("deformation transfer names degenerate triangles")
{
    FaceMesh mesh = make_uv_sphere(3, 6);
    FaceMesh bad = mesh;
    const int t = 5;
    bad.vertices.row(mesh.triangles(t, 1)) = bad.vertices.row(mesh.triangles(t, 0));
    try {
        deformation_transfer(bad, mesh, mesh);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateTriangle);
        CHECK(std::string(e.what()).find("triangle") != std::string::npos);
    }
}

TEST_CASE("vertex normals")
{
    FaceMesh quad;
    quad.vertices.resize(4, 3);
    quad.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    quad.triangles.resize(2, 3);
    quad.triangles << 0, 1, 2, 0, 2, 3;
    quad.region_labels.assign(4, Region::Other);
    const Eigen::MatrixX3d n = vertex_normals(quad);
    for (int v = 0; v < 4; ++v)
        CHECK((n.row(v) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-15);

    const FaceMesh sphere = make_icosphere(3);
    REQUIRE(sphere.vertex_count() == 642);
    const Eigen::MatrixX3d sn = vertex_normals(sphere);
    double worst = 0.0;
    for (int v = 0; v < sphere.vertex_count(); ++v) {
        const double c = std::clamp(sn.row(v).dot(sphere.vertices.row(v).normalized()), -1.0, 1.0);
        worst = std::max(worst, std::acos(c) * 180.0 / M_PI);
    }
    CHECK(worst < 5.0);

    FaceMesh flipped = sphere;
    flipped.triangles.col(1).swap(flipped.triangles.col(2));
    CHECK(oracle::max_abs(vertex_normals(flipped) + sn) < 1e-15);
}

TEST_CASE("mesh validation and topology id")
{
    const FaceMesh face = small_face();
    CHECK_NOTHROW(face.validate());
    CHECK(face.topology_id() == small_face().topology_id());
    FaceMesh other = face;
    other.anchors.pop_back();
    CHECK(other.topology_id() != face.topology_id());

    FaceMesh open_sil = face;
    open_sil.feature_curves["silhouette"].pop_back();
    CHECK_THROWS_AS(open_sil.validate(), Error);
    FaceMesh overlap = face;
    overlap.anchors.push_back(overlap.feature_curves["mouth"][0]);
    CHECK_THROWS_AS(overlap.validate(), Error);
    FaceMesh range = face;
    range.triangles(0, 0) = face.vertex_count();
    CHECK_THROWS_AS(range.validate(), Error);
    FaceMesh no_anchor = face;
    no_anchor.anchors.clear();
    CHECK_THROWS_AS(no_anchor.validate(), Error);
}

TEST_CASE("obj and sidecar round trip")
{
    const FaceMesh face = small_face();
    const auto dir = std::filesystem::temp_directory_path() / "caric_mesh_io_test";
    std::filesystem::remove_all(dir);
    save_face_mesh(face, dir / "m.obj", dir / "m.json");
    const FaceMesh back = load_face_mesh(dir / "m.obj", dir / "m.json");
    CHECK((back.vertices.array() == face.vertices.array()).all());
    CHECK((back.triangles.array() == face.triangles.array()).all());
    CHECK(back.region_labels == face.region_labels);
    CHECK(back.feature_curves == face.feature_curves);
    CHECK(back.anchors == face.anchors);
    CHECK(back.topology_id() == face.topology_id());
    std::filesystem::remove_all(dir);
}
