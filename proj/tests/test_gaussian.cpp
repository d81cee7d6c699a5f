#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mpmgs/errors.hpp"
#include "mpmgs/gaussian.hpp"
#include "oracles.hpp"

using namespace mpmgs;

namespace {

Trajectory tiny_trajectory(int frames, int particles, std::mt19937_64& rng) {
    Trajectory t;
    t.particle_count = particles;
    for (int f = 0; f < frames; ++f) {
        TrajectoryFrame fr;
        fr.time = f * 3e-3;
        for (int p = 0; p < particles; ++p) {
            fr.positions.push_back(oracle::random_vec(rng, 0.2, 0.8));
            fr.deformation.push_back(oracle::random_spd(rng, 0.8, 1.2));
        }
        t.frames.push_back(std::move(fr));
    }
    return t;
}

std::vector<GaussianKernel> tiny_kernels(int particles, std::mt19937_64& rng) {
    std::vector<GaussianKernel> ks(particles);
    for (auto& k : ks) {
        k.covariance = oracle::random_spd(rng, 0.01, 0.02);
        k.opacity = oracle::urand(rng, 0.2, 1.0);
    }
    return ks;
}

// out-of-line so the optimizer cannot elide the float rounding
__attribute__((noinline)) double f32(double v) { return static_cast<float>(v); }

}  // namespace

TEST_CASE("deform_covariance basics and properties") {
    const Mat3 sigma = Mat3::diag({0.04, 0.01, 0.02});
    CHECK((deform_covariance(sigma, Mat3::identity()) - sigma).frobenius_norm() == 0.0);

    const Mat3 scaled = deform_covariance(Mat3::identity(), Mat3::identity() * 2.0);
    CHECK((scaled - Mat3::identity() * 4.0).frobenius_norm() < 1e-12);

    std::mt19937_64 rng(51);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 cov = oracle::random_spd(rng, 0.1, 2.0);
        const Mat3 r = oracle::random_rotation(rng);
        const Mat3 rotated = deform_covariance(cov, r);
        // rotation preserves the eigenvalues
        const oracle::SymEig before = oracle::jacobi_eigen_sym(cov);
        const oracle::SymEig after = oracle::jacobi_eigen_sym(rotated);
        for (int e = 0; e < 3; ++e)
            CHECK(std::fabs(after.values[e] - before.values[e]) <= 1e-9 * before.values[e]);
        // exact symmetry after symmetrization
        CHECK((rotated - rotated.transposed()).frobenius_norm() == 0.0);
    }
}

TEST_CASE("deformed covariance determinant follows det(F)^2 det(S)") {
    std::mt19937_64 rng(52);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 cov = oracle::random_spd(rng, 0.1, 2.0);
        const Mat3 f = oracle::random_invertible(rng, 0.1);
        const double expected = f.determinant() * f.determinant() * cov.determinant();
        const double got = deform_covariance(cov, f).determinant();
        CHECK(std::fabs(got - expected) <= 1e-8 * std::fabs(expected));
    }
}

TEST_CASE("rotate_view_dir rotates by the polar rotation only") {
    const Vec3 d{1, 0, 0};
    CHECK((rotate_view_dir(d, Mat3::identity()) - d).norm() < 1e-12);

    const Mat3 rz90 = oracle::rotation_z(M_PI / 2.0);
    const Vec3 rotated = rotate_view_dir(d, rz90);
    CHECK(rotated.x == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
    CHECK(rotated.y == doctest::Approx(-1.0).epsilon(1e-9));

    const Vec3 unchanged = rotate_view_dir(d, Mat3::diag({2, 1, 1}));
    CHECK((unchanged - d).norm() < 1e-9);

    std::mt19937_64 rng(53);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 dir = oracle::random_vec(rng, -1, 1);
        if (dir.norm() < 1e-3) continue;
        const Mat3 f = oracle::random_invertible(rng, 0.1);
        CHECK(std::fabs(rotate_view_dir(dir, f).norm() - dir.norm()) <= 1e-10 * dir.norm());
    }

    CHECK_THROWS_AS(rotate_view_dir(d, Mat3::zero()), SingularInput);
}

TEST_CASE("frame export round-trips bit-exactly") {
    std::mt19937_64 rng(54);
    const Trajectory traj = tiny_trajectory(5, 7, rng);
    const std::vector<GaussianKernel> kernels = tiny_kernels(7, rng);
    const std::string path = "/tmp/mpmgs_test_frames.bin";

    export_frames(traj, kernels, path);
    const FrameData data = read_frames(path);
    CHECK(data.version == 1);
    CHECK(data.frames.size() == 5);
    CHECK(data.kernel_count == 7);
    for (int f = 0; f < 5; ++f) {
        for (int p = 0; p < 7; ++p) {
            const Vec3 expected_center{f32(traj.frames[f].positions[p].x),
                                       f32(traj.frames[f].positions[p].y),
                                       f32(traj.frames[f].positions[p].z)};
            CHECK(data.frames[f].centers[p] == expected_center);
            const Mat3 cov = deform_covariance(kernels[p].covariance, traj.frames[f].deformation[p]);
            CHECK(data.frames[f].covariances[p](0, 0) == f32(cov(0, 0)));
            CHECK(data.frames[f].covariances[p](1, 2) == f32(cov(1, 2)));
            // stored upper triangle mirrored into a symmetric matrix
            CHECK((data.frames[f].covariances[p] - data.frames[f].covariances[p].transposed())
                      .frobenius_norm() == 0.0);
        }
    }
    std::remove(path.c_str());

    std::vector<GaussianKernel> wrong = kernels;
    wrong.pop_back();
    CHECK_THROWS_AS(export_frames(traj, wrong, "/tmp/mpmgs_should_not_exist.bin"), ShapeMismatch);
}

TEST_CASE("read_frames rejects corrupt input") {
    const std::string path = "/tmp/mpmgs_test_corrupt.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "not a frame file at all";
    }
    CHECK_THROWS_AS(read_frames(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_frames("/tmp/missing_frames_477.bin"), IoError);
}

TEST_CASE("splat preview accumulates opacity-weighted footprints") {
    FrameKernels empty;
    const Image blank = splat_preview(empty, {}, 2, 64);
    for (auto px : blank.pixels) CHECK(px == 0);

    FrameKernels one;
    one.centers.push_back({0.5, 0.5, 0.5});
    one.covariances.push_back(Mat3::identity() * 1e-3);
    const Image single = splat_preview(one, {0.8}, 2, 65);
    // brightest pixel at the image center
    int best = 0;
    for (std::size_t i = 1; i < single.pixels.size(); ++i)
        if (single.pixels[i] > single.pixels[best]) best = static_cast<int>(i);
    const int cx = best % 65, cy = best / 65;
    CHECK(cx == 32);
    CHECK(cy == 32);

    // two identical kernels: additive accumulation is monotone per pixel
    FrameKernels two = one;
    two.centers.push_back({0.5, 0.5, 0.5});
    two.covariances.push_back(Mat3::identity() * 1e-3);
    const Image doubled = splat_preview(two, {0.8, 0.8}, 2, 65);
    for (std::size_t i = 0; i < doubled.pixels.size(); ++i)
        CHECK(doubled.pixels[i] >= single.pixels[i]);

    // determinism
    const Image again = splat_preview(one, {0.8}, 2, 65);
    for (std::size_t i = 0; i < again.pixels.size(); ++i)
        CHECK(again.pixels[i] == single.pixels[i]);
}

TEST_CASE("pgm writer emits a readable header") {
    Image img;
    img.width = 4;
    img.height = 2;
    img.pixels = {0, 64, 128, 255, 1, 2, 3, 4};
    const std::string path = "/tmp/mpmgs_test.pgm";
    write_pgm(img, path);
    std::ifstream is(path, std::ios::binary);
    std::string magic;
    int w, h, maxv;
    is >> magic >> w >> h >> maxv;
    CHECK(magic == "P5");
    CHECK(w == 4);
    CHECK(h == 2);
    CHECK(maxv == 255);
    std::remove(path.c_str());
}
