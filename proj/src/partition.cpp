#include "mpmgs/partition.hpp"

#include <limits>

#include "mpmgs/errors.hpp"

namespace mpmgs {

std::vector<int> fps_partition(const std::vector<Vec3>& positions, int n_centers) {
    const int n = static_cast<int>(positions.size());
    if (n_centers < 1 || n_centers > n)
        throw TooFewParticles("fps_partition: need 1 <= n_centers <= particle count");

    std::vector<int> centers;
    centers.reserve(n_centers);
    centers.push_back(0);

    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    for (int added = 1; added < n_centers; ++added) {
        const Vec3& last = positions[centers.back()];
        int best = -1;
        double best_dist = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d = (positions[i] - last).squared_norm();
            if (d < min_dist[i]) min_dist[i] = d;
            if (min_dist[i] > best_dist) {
                best_dist = min_dist[i];
                best = i;
            }
        }
        centers.push_back(best);
    }
    return centers;
}

Partition knn_assign(const std::vector<Vec3>& positions, const std::vector<int>& centers,
                     int k) {
    if (centers.empty()) throw TooFewParticles("knn_assign: no centers");
    Partition part;
    part.centers = centers;
    part.k = k;
    part.assignment.resize(positions.size());
    for (std::size_t p = 0; p < positions.size(); ++p) {
        int best = 0;
        double best_dist = (positions[p] - positions[centers[0]]).squared_norm();
        for (std::size_t c = 1; c < centers.size(); ++c) {
            const double d = (positions[p] - positions[centers[c]]).squared_norm();
            if (d < best_dist) {  // strict: ties keep the lowest center index
                best_dist = d;
                best = static_cast<int>(c);
            }
        }
        part.assignment[p] = best;
    }
    return part;
}

}  // namespace mpmgs
