#pragma once

#include <array>
#include <string>
#include <tuple>
#include <utility>

#include "mpmgs/errors.hpp"

namespace mpmgs {

enum class ElasticModel : int { FixedCorotated = 0, NeoHookean = 1, StVk = 2 };
enum class PlasticModel : int { Identity = 0, DruckerPrager = 1, VonMises = 2, Fluid = 3 };

inline constexpr int kElasticModelCount = 3;
inline constexpr int kPlasticModelCount = 4;

const char* to_string(ElasticModel m);
const char* to_string(PlasticModel m);
ElasticModel elastic_from_string(const std::string& s);   // throws ParseError
PlasticModel plastic_from_string(const std::string& s);   // throws ParseError

/// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)).
/// Throws InvalidPoissonRatio for nu outside the open interval (0, 0.5);
/// nu == 0 is additionally accepted (lambda == 0).
std::pair<double, double> lame_from_young_poisson(double youngs_modulus, double poisson_ratio);

struct PhysicalParams {
    double youngs_modulus = 1e5;   // Pa
    double poisson_ratio = 0.3;
    double mu = 0.0;               // Pa, derived
    double lambda = 0.0;           // Pa, derived
    double friction_angle_deg = 30.0;  // Drucker-Prager
    double yield_stress = 1e4;         // Pa, von Mises

    PhysicalParams() { std::tie(mu, lambda) = lame_from_young_poisson(youngs_modulus, poisson_ratio); }
    PhysicalParams(double e, double nu, double friction_deg = 30.0, double yield = 1e4)
        : youngs_modulus(e), poisson_ratio(nu), friction_angle_deg(friction_deg), yield_stress(yield) {
        std::tie(mu, lambda) = lame_from_young_poisson(e, nu);
    }
};

struct MaterialSpec {
    ElasticModel elastic = ElasticModel::FixedCorotated;
    PlasticModel plastic = PlasticModel::Identity;
    PhysicalParams params;
};

/// Constitutive evaluation weights. The simulator always works on these; a
/// hard material assignment is the one-hot case, and gradient probes may
/// pass slightly blended weights. Stress and return map blend linearly:
///   P(F)    = sum_j elastic_w[j] * P_j(F)
///   psi(Ft) = sum_k plastic_w[k] * psi_k(Ft)
struct BlendedMaterial {
    std::array<double, kElasticModelCount> elastic_w{};
    std::array<double, kPlasticModelCount> plastic_w{};
    PhysicalParams params;

    static BlendedMaterial from(const MaterialSpec& spec) {
        BlendedMaterial b;
        b.elastic_w[static_cast<int>(spec.elastic)] = 1.0;
        b.plastic_w[static_cast<int>(spec.plastic)] = 1.0;
        b.params = spec.params;
        return b;
    }
    bool is_hard() const {
        for (double w : elastic_w)
            if (w != 0.0 && w != 1.0) return false;
        for (double w : plastic_w)
            if (w != 0.0 && w != 1.0) return false;
        return true;
    }
};

}  // namespace mpmgs
