#pragma once

#include "mpmgs/mat3.hpp"
#include "mpmgs/materials.hpp"

namespace mpmgs {

/// psi(F) = F.
Mat3 return_identity(const Mat3& f_trial);

/// Drucker-Prager return map, F = U Z(S) V^T with
///   Z = I                                      when sum(eps) > 0,
///   Z = S                                      when dgamma <= 0,
///   Z = exp(eps - dgamma * eps_hat/|eps_hat|)  otherwise,
/// eps = log(S), eps_hat its deviatoric part, and
/// dgamma = |eps_hat| + alpha (3 lambda + 2 mu)/(2 mu) sum(eps),
/// alpha = sqrt(2/3) 2 sin(phi) / (3 - sin(phi)).
Mat3 return_drucker_prager(const Mat3& f_trial, const PhysicalParams& p);

/// von Mises return map: Z = S when dgamma <= 0, else
/// Z = exp(eps - dgamma * eps_hat/|eps_hat|) with
/// dgamma = |eps_hat| - yield_stress / (2 mu).
Mat3 return_von_mises(const Mat3& f_trial, const PhysicalParams& p);

/// Fluid: psi(F) = det(F)^{1/3} I; the determinant is preserved.
Mat3 return_fluid(const Mat3& f_trial);

/// Blended return map sum_k w_k psi_k(F_trial); shares one SVD across the
/// maps that need it. One-hot weights reproduce the individual maps exactly.
Mat3 apply_return_map(const BlendedMaterial& mat, const Mat3& f_trial);

}  // namespace mpmgs
