#include "mpmgs/plasticity.hpp"

#include <cmath>

#include "mpmgs/errors.hpp"
#include "mpmgs/svd3.hpp"

namespace mpmgs {

namespace {

constexpr double kDegenerateDet = 1e-10;
constexpr double kFlowEps = 1e-12;  // below this deviatoric magnitude there is no flow direction

void check_invertible(const Mat3& f, const char* who) {
    if (!(f.determinant() > kDegenerateDet))
        throw SingularInput(std::string(who) + ": degenerate trial deformation gradient");
}

// Projected singular values for Drucker-Prager.
Vec3 dp_project(const Vec3& sigma, const PhysicalParams& p) {
    const Vec3 eps = diag_log(sigma);
    const double tr = eps.sum();
    if (tr > 0.0) return Vec3::all(1.0);  // expansion: project to the cone tip
    const Vec3 dev = eps - Vec3::all(tr / 3.0);
    const double dev_norm = dev.norm();
    const double sin_phi = std::sin(p.friction_angle_deg * M_PI / 180.0);
    const double alpha = std::sqrt(2.0 / 3.0) * 2.0 * sin_phi / (3.0 - sin_phi);
    const double dgamma = dev_norm + alpha * (3.0 * p.lambda + 2.0 * p.mu) / (2.0 * p.mu) * tr;
    if (dgamma <= 0.0 || dev_norm < kFlowEps) return sigma;
    return diag_exp(eps - dev * (dgamma / dev_norm));
}

// Projected singular values for von Mises.
Vec3 vm_project(const Vec3& sigma, const PhysicalParams& p) {
    const Vec3 eps = diag_log(sigma);
    const Vec3 dev = eps - Vec3::all(eps.sum() / 3.0);
    const double dev_norm = dev.norm();
    const double dgamma = dev_norm - p.yield_stress / (2.0 * p.mu);
    if (dgamma <= 0.0 || dev_norm < kFlowEps) return sigma;
    return diag_exp(eps - dev * (dgamma / dev_norm));
}

}  // namespace

Mat3 return_identity(const Mat3& f_trial) { return f_trial; }

Mat3 return_drucker_prager(const Mat3& f_trial, const PhysicalParams& p) {
    check_invertible(f_trial, "return_drucker_prager");
    const Svd3 d = svd3(f_trial);
    return d.u * Mat3::diag(dp_project(d.sigma, p)) * d.v.transposed();
}

Mat3 return_von_mises(const Mat3& f_trial, const PhysicalParams& p) {
    check_invertible(f_trial, "return_von_mises");
    const Svd3 d = svd3(f_trial);
    return d.u * Mat3::diag(vm_project(d.sigma, p)) * d.v.transposed();
}

Mat3 return_fluid(const Mat3& f_trial) {
    check_invertible(f_trial, "return_fluid");
    return Mat3::identity() * std::cbrt(f_trial.determinant());
}

Mat3 apply_return_map(const BlendedMaterial& mat, const Mat3& f_trial) {
    const double w_id = mat.plastic_w[static_cast<int>(PlasticModel::Identity)];
    const double w_dp = mat.plastic_w[static_cast<int>(PlasticModel::DruckerPrager)];
    const double w_vm = mat.plastic_w[static_cast<int>(PlasticModel::VonMises)];
    const double w_fl = mat.plastic_w[static_cast<int>(PlasticModel::Fluid)];

    if (w_id == 1.0 && w_dp == 0.0 && w_vm == 0.0 && w_fl == 0.0) return f_trial;

    Mat3 out = Mat3::zero();
    if (w_id != 0.0) out += f_trial * w_id;
    if (w_fl != 0.0) out += return_fluid(f_trial) * w_fl;
    if (w_dp != 0.0 || w_vm != 0.0) {
        check_invertible(f_trial, "apply_return_map");
        const Svd3 d = svd3(f_trial);
        if (w_dp != 0.0)
            out += d.u * Mat3::diag(dp_project(d.sigma, mat.params)) * d.v.transposed() * w_dp;
        if (w_vm != 0.0)
            out += d.u * Mat3::diag(vm_project(d.sigma, mat.params)) * d.v.transposed() * w_vm;
    }
    return out;
}

}  // namespace mpmgs
