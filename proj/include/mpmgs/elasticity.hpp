#pragma once

#include "mpmgs/mat3.hpp"
#include "mpmgs/materials.hpp"
#include "mpmgs/svd3.hpp"

namespace mpmgs {

/// Lowest admissible Jacobian for the Neo-Hookean log(J) term.
inline constexpr double kNeoHookeanJMin = 0.05;

/// First Piola-Kirchhoff stress of the fixed corotated model:
///   P = 2 mu (F - R) + lambda J (J - 1) F^{-T},  F = R S.
Mat3 fixed_corotated_piola(const Mat3& f, const PhysicalParams& p);

/// P = mu (F - F^{-T}) + lambda log(J) F^{-T}.
/// Throws DegenerateJacobian when det(f) <= kNeoHookeanJMin.
Mat3 neo_hookean_piola(const Mat3& f, const PhysicalParams& p);

/// Hencky-strain StVK:
///   P = U (2 mu S^{-1} ln S + lambda tr(ln S) S^{-1}) V^T,  F = U S V^T.
/// Throws NonPositiveSingularValue when any singular value is <= 0.
Mat3 stvk_piola(const Mat3& f, const PhysicalParams& p);

/// Scalar strain energy densities matching the stress laws above
/// (P = dPsi/dF).
double fixed_corotated_energy(const Mat3& f, const PhysicalParams& p);
double neo_hookean_energy(const Mat3& f, const PhysicalParams& p);
double stvk_energy(const Mat3& f, const PhysicalParams& p);

/// Cauchy stress from first Piola-Kirchhoff stress:
///   sigma = (1/det f) p f^T.
/// Throws SingularInput when det(f) is at or below the degeneracy threshold.
Mat3 cauchy_from_piola(const Mat3& f, const Mat3& p);

/// Kirchhoff stress tau = (sum_j w_j P_j(F)) F^T of a blended material; this
/// is det(F) times the Cauchy stress and is the per-particle quantity the
/// grid force sum consumes. Shares one SVD across the models that need it.
Mat3 kirchhoff_stress(const BlendedMaterial& mat, const Mat3& f);

}  // namespace mpmgs
