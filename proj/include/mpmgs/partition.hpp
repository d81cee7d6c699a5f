#pragma once

#include <vector>

#include "mpmgs/vec3.hpp"

namespace mpmgs {

/// Farthest point sampling: greedy max-min-distance selection starting from
/// index 0. Each added center maximizes the distance to the selected set.
/// Throws TooFewParticles when n_centers exceeds the point count or the
/// cloud is empty.
std::vector<int> fps_partition(const std::vector<Vec3>& positions, int n_centers);

/// A fixed particle-to-neighborhood assignment, computed once before
/// simulation and immutable afterwards.
struct Partition {
    std::vector<int> centers;      // particle indices of the neighborhood centers
    std::vector<int> assignment;   // per particle: index into centers
    int k = 32;                    // nominal neighborhood size

    std::size_t neighborhood_count() const { return centers.size(); }
};

/// Assigns every particle to its nearest center (ties broken by the lowest
/// center index).
Partition knn_assign(const std::vector<Vec3>& positions, const std::vector<int>& centers, int k);

}  // namespace mpmgs
