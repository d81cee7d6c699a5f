#include "mpmgs/elasticity.hpp"

#include <cmath>

#include "mpmgs/errors.hpp"

namespace mpmgs {

namespace {

constexpr double kDegenerateDet = 1e-10;

// Fixed corotated stress given a precomputed SVD of f.
// lambda J (J-1) F^{-T} is evaluated as lambda (J-1) cof(F) to avoid the
// division by J.
Mat3 fc_piola(const Mat3& f, const Svd3& d, const PhysicalParams& p) {
    const Mat3 r = d.u * d.v.transposed();
    const double j = f.determinant();
    return (f - r) * (2.0 * p.mu) + f.cofactor() * (p.lambda * (j - 1.0));
}

Mat3 stvk_piola_svd(const Svd3& d, const PhysicalParams& p) {
    const Vec3 eps = diag_log(d.sigma);  // throws on non-positive singulars
    const double tr = eps.sum();
    const Vec3 diag{(2.0 * p.mu * eps.x + p.lambda * tr) / d.sigma.x,
                    (2.0 * p.mu * eps.y + p.lambda * tr) / d.sigma.y,
                    (2.0 * p.mu * eps.z + p.lambda * tr) / d.sigma.z};
    return d.u * Mat3::diag(diag) * d.v.transposed();
}

Mat3 nh_piola(const Mat3& f, const PhysicalParams& p) {
    const double j = f.determinant();
    if (!(j > kNeoHookeanJMin))
        throw DegenerateJacobian("neo_hookean_piola: det(F) at or below J_min");
    const Mat3 f_inv_t = f.cofactor() * (1.0 / j);
    return f * p.mu - f_inv_t * p.mu + f_inv_t * (p.lambda * std::log(j));
}

}  // namespace

Mat3 fixed_corotated_piola(const Mat3& f, const PhysicalParams& p) {
    if (!(f.determinant() > kDegenerateDet))
        throw SingularInput("fixed_corotated_piola: degenerate deformation gradient");
    return fc_piola(f, svd3(f), p);
}

Mat3 neo_hookean_piola(const Mat3& f, const PhysicalParams& p) { return nh_piola(f, p); }

Mat3 stvk_piola(const Mat3& f, const PhysicalParams& p) { return stvk_piola_svd(svd3(f), p); }

double fixed_corotated_energy(const Mat3& f, const PhysicalParams& p) {
    const Svd3 d = svd3(f);
    const double j = f.determinant();
    const Vec3 s1 = d.sigma - Vec3::all(1.0);
    return p.mu * s1.squared_norm() + 0.5 * p.lambda * (j - 1.0) * (j - 1.0);
}

double neo_hookean_energy(const Mat3& f, const PhysicalParams& p) {
    const double j = f.determinant();
    if (!(j > kNeoHookeanJMin))
        throw DegenerateJacobian("neo_hookean_energy: det(F) at or below J_min");
    const double log_j = std::log(j);
    return 0.5 * p.mu * ((f.transposed() * f).trace() - 3.0) - p.mu * log_j
         + 0.5 * p.lambda * log_j * log_j;
}

double stvk_energy(const Mat3& f, const PhysicalParams& p) {
    const Vec3 eps = diag_log(svd3(f).sigma);
    return p.mu * eps.squared_norm() + 0.5 * p.lambda * eps.sum() * eps.sum();
}

Mat3 cauchy_from_piola(const Mat3& f, const Mat3& p) {
    const double j = f.determinant();
    if (!(j > kDegenerateDet))
        throw SingularInput("cauchy_from_piola: degenerate deformation gradient");
    return p * f.transposed() * (1.0 / j);
}

Mat3 kirchhoff_stress(const BlendedMaterial& mat, const Mat3& f) {
    const double w_fc = mat.elastic_w[static_cast<int>(ElasticModel::FixedCorotated)];
    const double w_nh = mat.elastic_w[static_cast<int>(ElasticModel::NeoHookean)];
    const double w_sv = mat.elastic_w[static_cast<int>(ElasticModel::StVk)];

    Mat3 piola = Mat3::zero();
    if (w_fc != 0.0 || w_sv != 0.0) {
        const Svd3 d = svd3(f);
        if (w_fc != 0.0) piola += fc_piola(f, d, mat.params) * w_fc;
        if (w_sv != 0.0) piola += stvk_piola_svd(d, mat.params) * w_sv;
    }
    if (w_nh != 0.0) piola += nh_piola(f, mat.params) * w_nh;
    return piola * f.transposed();
}

}  // namespace mpmgs
