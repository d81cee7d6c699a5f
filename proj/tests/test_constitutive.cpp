#include <doctest.h>

#include <cmath>

#include "mpmgs/elasticity.hpp"
#include "mpmgs/errors.hpp"
#include "mpmgs/plasticity.hpp"
#include "oracles.hpp"

using namespace mpmgs;

namespace {

PhysicalParams unit_lame() {
    // mu = lambda = 1 by direct construction
    PhysicalParams p;
    p.mu = 1.0;
    p.lambda = 1.0;
    return p;
}

// central finite difference of a scalar energy w.r.t. F entries
template <class Energy>
Mat3 fd_piola(const Energy& psi, const Mat3& f, double h) {
    Mat3 g;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            Mat3 fp = f, fm = f;
            fp(i, j) += h;
            fm(i, j) -= h;
            g(i, j) = (psi(fp) - psi(fm)) / (2.0 * h);
        }
    }
    return g;
}

}  // namespace

TEST_CASE("lame parameters from Young's modulus and Poisson ratio") {
    const auto [mu, lambda] = lame_from_young_poisson(1e5, 0.3);
    CHECK(mu == doctest::Approx(38461.538461538).epsilon(1e-9));
    CHECK(lambda == doctest::Approx(57692.307692308).epsilon(1e-9));

    const auto [mu2, lambda2] = lame_from_young_poisson(2.0, 0.0);
    CHECK(mu2 == doctest::Approx(1.0));
    CHECK(lambda2 == 0.0);

    CHECK_THROWS_AS(lame_from_young_poisson(1e5, 0.5), InvalidPoissonRatio);
    CHECK_THROWS_AS(lame_from_young_poisson(1e5, 0.6), InvalidPoissonRatio);
    CHECK_THROWS_AS(lame_from_young_poisson(1e5, -0.1), InvalidPoissonRatio);
}

TEST_CASE("physical params derive lame exactly") {
    const PhysicalParams p(1e5, 0.3);
    const auto [mu, lambda] = lame_from_young_poisson(1e5, 0.3);
    CHECK(p.mu == mu);
    CHECK(p.lambda == lambda);
}

TEST_CASE("fixed corotated stress: rest, rotation, hand-evaluated stretch") {
    const PhysicalParams p = unit_lame();
    CHECK(fixed_corotated_piola(Mat3::identity(), p).frobenius_norm() <= 1e-12);

    std::mt19937_64 rng(21);
    for (int i = 0; i < 20; ++i) {
        const Mat3 r = oracle::random_rotation(rng);
        CHECK(fixed_corotated_piola(r, p).frobenius_norm() <= 1e-8);
    }

    const Mat3 f = Mat3::diag({1.1, 1, 1});
    const Mat3 piola = fixed_corotated_piola(f, p);
    CHECK(piola(0, 0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(piola(1, 1) == doctest::Approx(0.11).epsilon(1e-9));
    CHECK(piola(2, 2) == doctest::Approx(0.11).epsilon(1e-9));
}

TEST_CASE("neo-hookean stress: rest, rotation, hand-evaluated stretch, J_min") {
    const PhysicalParams p = unit_lame();
    CHECK(neo_hookean_piola(Mat3::identity(), p).frobenius_norm() <= 1e-12);

    std::mt19937_64 rng(22);
    for (int i = 0; i < 20; ++i)
        CHECK(neo_hookean_piola(oracle::random_rotation(rng), p).frobenius_norm() <= 1e-8);

    const Mat3 f = Mat3::diag({1.1, 1, 1});
    const Mat3 piola = neo_hookean_piola(f, p);
    CHECK(piola(0, 0) == doctest::Approx(0.2775548).epsilon(1e-6));
    CHECK(piola(1, 1) == doctest::Approx(0.0953102).epsilon(1e-6));
    CHECK(piola(2, 2) == doctest::Approx(0.0953102).epsilon(1e-6));

    CHECK_THROWS_AS(neo_hookean_piola(Mat3::diag({0.05, 1, 1}), p), DegenerateJacobian);
}

TEST_CASE("stvk stress: rest, rotation, hand-evaluated stretch") {
    const PhysicalParams p = unit_lame();
    CHECK(stvk_piola(Mat3::identity(), p).frobenius_norm() <= 1e-12);

    std::mt19937_64 rng(23);
    for (int i = 0; i < 20; ++i)
        CHECK(stvk_piola(oracle::random_rotation(rng), p).frobenius_norm() <= 1e-8);

    const Mat3 f = Mat3::diag({1.1, 1, 1});
    const Mat3 piola = stvk_piola(f, p);
    const double ln11 = std::log(1.1);
    CHECK(piola(0, 0) == doctest::Approx(3.0 * ln11 / 1.1).epsilon(1e-9));
    CHECK(piola(1, 1) == doctest::Approx(ln11).epsilon(1e-9));
    CHECK(piola(2, 2) == doctest::Approx(ln11).epsilon(1e-9));

    CHECK_THROWS_AS(stvk_piola(Mat3::diag({-1, 1, 1}), p), NonPositiveSingularValue);
}

TEST_CASE("cauchy from piola") {
    const Mat3 arbitrary{1, 2, 3, 4, 5, 6, 7, 8, 10};
    CHECK((cauchy_from_piola(Mat3::identity(), arbitrary) - arbitrary).frobenius_norm() < 1e-12);
    CHECK(cauchy_from_piola(Mat3::diag({2, 1, 1}), Mat3::zero()).frobenius_norm() == 0.0);

    const Mat3 sigma = cauchy_from_piola(Mat3::diag({2, 1, 1}), Mat3::diag({1, 0, 0}));
    CHECK(sigma(0, 0) == doctest::Approx(1.0));
    CHECK(sigma(1, 1) == 0.0);

    CHECK_THROWS_AS(cauchy_from_piola(Mat3::zero(), arbitrary), SingularInput);
}

TEST_CASE("cauchy stress is symmetric for all three elastic models") {
    const PhysicalParams p(1e5, 0.3);
    std::mt19937_64 rng(24);
    for (int i = 0; i < 200; ++i) {
        const Mat3 f = oracle::random_invertible(rng, 0.3);
        for (int model = 0; model < 3; ++model) {
            Mat3 piola;
            if (model == 0) piola = fixed_corotated_piola(f, p);
            else if (model == 1) piola = neo_hookean_piola(f, p);
            else piola = stvk_piola(f, p);
            const Mat3 sigma = cauchy_from_piola(f, piola);
            const double asym = (sigma - sigma.transposed()).frobenius_norm();
            CHECK(asym <= 1e-7 * std::max(sigma.frobenius_norm(), 1e-30));
        }
    }
}

TEST_CASE("piola equals the central finite difference of the energy") {
    const PhysicalParams p(30.0, 0.25);
    std::mt19937_64 rng(25);
    const double h = 1e-5;
    for (int i = 0; i < 100; ++i) {
        const Mat3 f = oracle::random_invertible(rng, 0.3);

        const Mat3 fc = fixed_corotated_piola(f, p);
        const Mat3 fc_fd =
            fd_piola([&](const Mat3& m) { return fixed_corotated_energy(m, p); }, f, h);
        CHECK((fc - fc_fd).frobenius_norm() <= 1e-4 * fc.frobenius_norm());

        const Mat3 nh = neo_hookean_piola(f, p);
        const Mat3 nh_fd =
            fd_piola([&](const Mat3& m) { return neo_hookean_energy(m, p); }, f, h);
        CHECK((nh - nh_fd).frobenius_norm() <= 1e-4 * nh.frobenius_norm());

        const Mat3 sv = stvk_piola(f, p);
        const Mat3 sv_fd = fd_piola([&](const Mat3& m) { return stvk_energy(m, p); }, f, h);
        CHECK((sv - sv_fd).frobenius_norm() <= 2e-4 * std::max(sv.frobenius_norm(), 1e-12));
    }
}

TEST_CASE("identity return map") {
    CHECK(return_identity(Mat3::identity()) == Mat3::identity());
    CHECK(return_identity(Mat3::diag({3, 1, 1})) == Mat3::diag({3, 1, 1}));
    std::mt19937_64 rng(26);
    const Mat3 m = oracle::random_matrix(rng, -2, 2);
    CHECK(return_identity(m) == m);
}

TEST_CASE("drucker-prager return map cases") {
    const PhysicalParams p(1e5, 0.3);

    // expansion: all log-strains positive
    const Mat3 expanded = return_drucker_prager(Mat3::diag({1.2, 1.1, 1.05}), p);
    CHECK((expanded - Mat3::identity()).frobenius_norm() < 1e-9);

    // pure rotation passes through
    const Mat3 r = oracle::rotation_z(0.4);
    CHECK((return_drucker_prager(r, p) - r).frobenius_norm() < 1e-9);
}

TEST_CASE("von mises return map cases") {
    const PhysicalParams p(1e5, 0.3, 30.0, 1e4);
    // below yield: |dev log strain| < yield_stress / (2 mu) ~= 0.13
    const Mat3 small = Mat3::diag({1.01, 1.0, 1.0});
    CHECK((return_von_mises(small, p) - small).frobenius_norm() < 1e-12);
    CHECK((return_von_mises(Mat3::identity(), p) - Mat3::identity()).frobenius_norm() == 0.0);
}

TEST_CASE("fluid return map") {
    const Mat3 out = return_fluid(Mat3::diag({2, 1, 1}));
    CHECK(out(0, 0) == doctest::Approx(1.2599210498948732).epsilon(1e-12));
    CHECK(out(0, 1) == 0.0);
    CHECK((return_fluid(Mat3::identity()) - Mat3::identity()).frobenius_norm() == 0.0);

    std::mt19937_64 rng(27);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 f = oracle::random_spd(rng);
        const double det_in = f.determinant();
        const double det_out = return_fluid(f).determinant();
        CHECK(std::fabs(det_out - det_in) <= 1e-10 * det_in);
    }
}

TEST_CASE("all four return maps are idempotent") {
    const PhysicalParams p(1e5, 0.3, 30.0, 1e4);
    std::mt19937_64 rng(28);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 f = oracle::random_invertible(rng, 0.05);

        const Mat3 dp1 = return_drucker_prager(f, p);
        CHECK((return_drucker_prager(dp1, p) - dp1).frobenius_norm() <= 1e-8);

        const Mat3 vm1 = return_von_mises(f, p);
        CHECK((return_von_mises(vm1, p) - vm1).frobenius_norm() <= 1e-8);

        const Mat3 fl1 = return_fluid(f);
        CHECK((return_fluid(fl1) - fl1).frobenius_norm() <= 1e-8);

        CHECK((return_identity(return_identity(f)) - return_identity(f)).frobenius_norm() == 0.0);
    }
}

TEST_CASE("all 12 material combinations are constructible and evaluable") {
    std::mt19937_64 rng(29);
    const Mat3 f = oracle::random_invertible(rng, 0.5);
    for (int e = 0; e < kElasticModelCount; ++e) {
        for (int pl = 0; pl < kPlasticModelCount; ++pl) {
            MaterialSpec spec;
            spec.elastic = static_cast<ElasticModel>(e);
            spec.plastic = static_cast<PlasticModel>(pl);
            spec.params = PhysicalParams(1e5, 0.3);
            const BlendedMaterial mat = BlendedMaterial::from(spec);
            CHECK(mat.is_hard());
            CHECK(kirchhoff_stress(mat, f).finite());
            CHECK(apply_return_map(mat, f).finite());
        }
    }
}

TEST_CASE("one-hot blended evaluation matches the individual models") {
    const PhysicalParams p(2e5, 0.35, 25.0, 5e3);
    std::mt19937_64 rng(30);
    for (int i = 0; i < 50; ++i) {
        const Mat3 f = oracle::random_invertible(rng, 0.3);

        MaterialSpec spec;
        spec.params = p;
        spec.elastic = ElasticModel::NeoHookean;
        spec.plastic = PlasticModel::DruckerPrager;
        const BlendedMaterial mat = BlendedMaterial::from(spec);
        const Mat3 tau = kirchhoff_stress(mat, f);
        const Mat3 expected = neo_hookean_piola(f, p) * f.transposed();
        CHECK((tau - expected).frobenius_norm() <= 1e-12 * std::max(1.0, expected.frobenius_norm()));
        CHECK((apply_return_map(mat, f) - return_drucker_prager(f, p)).frobenius_norm() == 0.0);
    }
}
