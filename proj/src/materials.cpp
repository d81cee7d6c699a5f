#include "mpmgs/materials.hpp"

namespace mpmgs {

const char* to_string(ElasticModel m) {
    switch (m) {
        case ElasticModel::FixedCorotated: return "fixed_corotated";
        case ElasticModel::NeoHookean: return "neo_hookean";
        case ElasticModel::StVk: return "stvk";
    }
    return "?";
}

const char* to_string(PlasticModel m) {
    switch (m) {
        case PlasticModel::Identity: return "identity";
        case PlasticModel::DruckerPrager: return "drucker_prager";
        case PlasticModel::VonMises: return "von_mises";
        case PlasticModel::Fluid: return "fluid";
    }
    return "?";
}

ElasticModel elastic_from_string(const std::string& s) {
    if (s == "fixed_corotated") return ElasticModel::FixedCorotated;
    if (s == "neo_hookean") return ElasticModel::NeoHookean;
    if (s == "stvk") return ElasticModel::StVk;
    throw ParseError("unknown elastic model '" + s + "'");
}

PlasticModel plastic_from_string(const std::string& s) {
    if (s == "identity") return PlasticModel::Identity;
    if (s == "drucker_prager") return PlasticModel::DruckerPrager;
    if (s == "von_mises") return PlasticModel::VonMises;
    if (s == "fluid") return PlasticModel::Fluid;
    throw ParseError("unknown plastic model '" + s + "'");
}

std::pair<double, double> lame_from_young_poisson(double youngs_modulus, double poisson_ratio) {
    if (!(youngs_modulus > 0.0))
        throw ValidationError("Young's modulus must be positive");
    if (!(poisson_ratio >= 0.0) || !(poisson_ratio < 0.5))
        throw InvalidPoissonRatio("Poisson ratio must lie in [0, 0.5)");
    const double mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
    const double lambda = youngs_modulus * poisson_ratio
                        / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    return {mu, lambda};
}

}  // namespace mpmgs
