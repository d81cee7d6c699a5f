#pragma once

#include <cstddef>

namespace mpmgs {

struct BenchReport {
    std::size_t particles = 0;
    int steps = 0;
    double elapsed_seconds = 0.0;
    double peak_rss_mb = 0.0;
    double particle_steps_per_second = 0.0;
};

/// Forward-only throughput benchmark: a dense cube of the requested particle
/// count dropped on a sticky ground plane, default constants, no trajectory
/// retention. Throws ValidationError on non-positive sizes; UnstableStep
/// propagates.
BenchReport run_bench(std::size_t particles, int steps, int threads = 1);

}  // namespace mpmgs
