#pragma once

#include <limits>
#include <vector>

#include "mpmgs/vec3.hpp"

namespace mpmgs {

/// Boundary conditions. Impulses act on particles before P2G; everything
/// else acts on grid velocities before G2P.
struct BoundaryCondition {
    enum class Kind {
        GroundPlaneSticky,  // nodes at/below z = height: v = 0
        GroundPlaneSlip,    // nodes at/below z = height: v_z = min(v_z, 0) removed
        DomainWalls,        // nodes within margin_cells of any face
        Impulse,            // one-shot particle velocity add at window start
        ConstantForce,      // total force (N) over the region mass during the window
    };

    Kind kind = Kind::GroundPlaneSticky;
    double height = 0.0;      // ground planes
    bool sticky = false;      // domain walls: sticky or slip
    int margin_cells = 2;     // domain walls
    Vec3 region_min{-std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
    Vec3 region_max{std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    double time_begin = 0.0;
    double time_end = std::numeric_limits<double>::infinity();
    Vec3 vector;  // m/s for Impulse, N for ConstantForce

    bool active_at(double t) const { return t >= time_begin && t < time_end; }
    bool contains(const Vec3& p) const {
        return p.x >= region_min.x && p.x <= region_max.x && p.y >= region_min.y
            && p.y <= region_max.y && p.z >= region_min.z && p.z <= region_max.z;
    }
};

struct BoundarySet {
    std::vector<BoundaryCondition> items;
};

}  // namespace mpmgs
