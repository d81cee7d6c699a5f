#include <doctest.h>

#include <cmath>

#include "mpmgs/errors.hpp"
#include "mpmgs/mpm.hpp"
#include "oracles.hpp"

using namespace mpmgs;

namespace {

GridField unit_grid(int cells = 25) { return GridField::make({0, 0, 0}, {1, 1, 1}, cells); }

MaterialSpec soft_spec() { return MaterialSpec{}; }  // fixed corotated + identity, E=1e5

// random particles well inside the domain with random velocities and C
ParticleState random_state(std::mt19937_64& rng, GridField& grid, int count) {
    std::vector<Vec3> pos;
    std::vector<double> mass, vol;
    for (int i = 0; i < count; ++i) {
        pos.push_back(oracle::random_vec(rng, 0.2, 0.8));
        mass.push_back(oracle::urand(rng, 0.5, 2.0) * 1e-3);
        vol.push_back(8e-6);
    }
    ParticleState st = init_state(pos, mass, vol, grid);
    for (int i = 0; i < count; ++i) {
        st.v[i] = oracle::random_vec(rng, -0.5, 0.5);
        st.C[i] = oracle::random_matrix(rng, -1.0, 1.0);
    }
    return st;
}

double total_mass(const GridField& g) {
    double m = 0;
    for (double v : g.mass) m += v;
    return m;
}

Vec3 total_grid_momentum(const GridField& g) {
    Vec3 p;
    for (const Vec3& v : g.momentum) p += v;
    return p;
}

Vec3 total_particle_momentum(const ParticleState& st) {
    Vec3 p;
    for (std::size_t i = 0; i < st.size(); ++i) p += st.v[i] * st.mass[i];
    return p;
}

SimInput bouncing_cube_input(const MaterialSpec& spec) {
    SimInput in;
    in.grid = unit_grid();
    std::vector<Vec3> pos;
    std::vector<double> mass, vol;
    const double dx = in.grid.dx;
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            for (int k = 0; k < 10; ++k) {
                const Vec3 p = Vec3{0.4, 0.4, 0.4}
                             + Vec3{(i + 0.5) * 0.02, (j + 0.5) * 0.02, (k + 0.5) * 0.02};
                pos.push_back(p);
                mass.push_back(1000.0 * dx * dx * dx / 8.0);
                vol.push_back(dx * dx * dx / 8.0);
            }
    in.initial = init_state(pos, mass, vol, in.grid);
    in.materials = MaterialTable::uniform(spec, pos.size());
    BoundaryCondition ground;
    ground.kind = BoundaryCondition::Kind::GroundPlaneSticky;
    ground.height = 3.0 * dx;
    in.boundaries.items.push_back(ground);
    return in;
}

}  // namespace

TEST_CASE("quadratic stencil at a node and partition of unity") {
    GridField grid = unit_grid();
    // particle exactly at node (10, 10, 10)
    const Vec3 xp = grid.node_position(10, 10, 10);
    const Stencil s = bspline_stencil(xp, grid);
    for (int a = 0; a < 3; ++a) {
        CHECK(s.base[a] == 9);
        CHECK(s.w[a][0] == doctest::Approx(0.125).epsilon(1e-12));
        CHECK(s.w[a][1] == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(s.w[a][2] == doctest::Approx(0.125).epsilon(1e-12));
    }

    std::mt19937_64 rng(31);
    for (int i = 0; i < 100000; ++i) {
        const Vec3 p = oracle::random_vec(rng, 0.08, 0.92);
        const Stencil st = bspline_stencil(p, grid);
        for (int a = 0; a < 3; ++a) {
            CHECK(std::fabs(st.w[a][0] + st.w[a][1] + st.w[a][2] - 1.0) < 1e-12);
            CHECK(std::fabs(st.dw[a][0] + st.dw[a][1] + st.dw[a][2]) < 1e-10);
        }
    }
}

TEST_CASE("init_state zero-initializes and validates") {
    GridField grid = unit_grid();
    const ParticleState st = init_state({{0.5, 0.5, 0.5}}, {1e-3}, {8e-6}, grid);
    CHECK(st.v[0] == Vec3{});
    CHECK(st.F[0] == Mat3::identity());
    CHECK(st.C[0] == Mat3::zero());
    CHECK(total_mass(grid) == 0.0);

    const ParticleState empty = init_state({}, {}, {}, grid);
    CHECK(empty.size() == 0);

    CHECK_THROWS_AS(init_state({{2, 2, 2}}, {1.0}, {1.0}, grid), OutOfDomain);
    CHECK_THROWS_AS(init_state({{0.5, 0.5, 0.5}}, {0.0}, {1.0}, grid), ValidationError);
}

TEST_CASE("p2g conserves mass and transfers APIC momentum") {
    std::mt19937_64 rng(32);
    for (int scene = 0; scene < 10; ++scene) {
        GridField grid = unit_grid();
        ParticleState st = random_state(rng, grid, 50 + scene * 10);
        p2g(st, grid);
        double pm = 0;
        for (double m : st.mass) pm += m;
        CHECK(std::fabs(total_mass(grid) - pm) <= 1e-12 * pm);
        // APIC C term carries no net momentum (linear reproduction)
        const Vec3 diff = total_grid_momentum(grid) - total_particle_momentum(st);
        CHECK(diff.norm() <= 1e-10 * std::max(total_particle_momentum(st).norm(), 1e-12));
    }
}

TEST_CASE("single particle at a node scatters mass by stencil weights") {
    GridField grid = unit_grid();
    const Vec3 xp = grid.node_position(12, 12, 12);
    ParticleState st = init_state({xp}, {2e-3}, {8e-6}, grid);
    st.v[0] = {1, 0, 0};
    p2g(st, grid);

    // momentum sums to m v and concentrates at the stencil nodes
    const Vec3 total = total_grid_momentum(grid);
    CHECK(total.x == doctest::Approx(2e-3).epsilon(1e-12));
    CHECK(total.y == 0.0);
    const double w_center = 0.75 * 0.75 * 0.75;
    CHECK(grid.momentum[grid.node_index(12, 12, 12)].x ==
          doctest::Approx(2e-3 * w_center).epsilon(1e-12));

    // locality: only the 27 stencil nodes hold mass
    int occupied = 0;
    for (double m : grid.mass)
        if (m > 0) ++occupied;
    CHECK(occupied == 27);
    for (int i = 0; i < grid.nodes_per_axis(); ++i)
        for (int j = 0; j < grid.nodes_per_axis(); ++j)
            for (int k = 0; k < grid.nodes_per_axis(); ++k)
                if (std::abs(i - 12) > 1 || std::abs(j - 12) > 1 || std::abs(k - 12) > 1)
                    CHECK(grid.mass[grid.node_index(i, j, k)] == 0.0);
}

TEST_CASE("C term vanishes at the coincident node") {
    GridField grid = unit_grid();
    const Vec3 xp = grid.node_position(12, 12, 12);
    ParticleState st = init_state({xp}, {1e-3}, {8e-6}, grid);
    st.C[0] = Mat3{0, 1, 0, -1, 0, 0, 0, 0, 2};
    p2g(st, grid);
    // at x_i == x_p the affine contribution (x_i - x_p) vanishes
    CHECK(grid.momentum[grid.node_index(12, 12, 12)].norm() == 0.0);
}

TEST_CASE("grid update applies gravity and boundary conditions") {
    GridField grid = unit_grid();
    ParticleState st = init_state({{0.5, 0.5, 0.5}}, {1e-3}, {8e-6}, grid);
    p2g(st, grid);
    const std::vector<Mat3> zero_stress(1, Mat3::zero());
    StepParams params;

    SUBCASE("gravity only") {
        BoundarySet none;
        grid_update(grid, st, zero_stress, none, params, 0.0);
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            if (grid.mass[i] >= params.node_mass_epsilon) {
                CHECK(grid.velocity[i].z == doctest::Approx(-9.8 * params.dt).epsilon(1e-12));
                CHECK(grid.velocity[i].x == 0.0);
            } else {
                CHECK(grid.velocity[i] == Vec3{});
            }
        }
    }

    SUBCASE("zero gravity leaves velocities unchanged") {
        params.gravity = {0, 0, 0};
        BoundarySet none;
        grid_update(grid, st, zero_stress, none, params, 0.0);
        for (std::size_t i = 0; i < grid.node_count(); ++i)
            if (grid.mass[i] >= params.node_mass_epsilon)
                CHECK((grid.velocity[i] - grid.momentum[i] / grid.mass[i]).norm() < 1e-15);
    }

    SUBCASE("sticky ground plane zeroes nodes at or below the plane") {
        GridField g2 = unit_grid();
        ParticleState low = init_state({{0.5, 0.5, 0.12}}, {1e-3}, {8e-6}, g2);
        low.v[0] = {1, 2, -3};
        p2g(low, g2);
        BoundarySet bc;
        BoundaryCondition ground;
        ground.kind = BoundaryCondition::Kind::GroundPlaneSticky;
        ground.height = 0.12;
        bc.items.push_back(ground);
        grid_update(g2, low, zero_stress, bc, params, 0.0);
        for (int i = 0; i < g2.nodes_per_axis(); ++i)
            for (int j = 0; j < g2.nodes_per_axis(); ++j)
                for (int k = 0; k < g2.nodes_per_axis(); ++k)
                    if (g2.node_position(i, j, k).z <= 0.12)
                        CHECK(g2.velocity[g2.node_index(i, j, k)] == Vec3{});
    }
}

TEST_CASE("g2p reproduces a uniform grid velocity exactly") {
    GridField grid = unit_grid();
    ParticleState st = init_state({{0.503, 0.497, 0.512}}, {1e-3}, {8e-6}, grid);
    const Mat3 f0 = Mat3::diag({1.2, 0.9, 1.05});
    st.F[0] = f0;
    StepParams params;

    grid.velocity.assign(grid.node_count(), Vec3{0.3, -0.2, 0.1});
    g2p(grid, st, params);
    CHECK((st.v[0] - Vec3{0.3, -0.2, 0.1}).norm() < 1e-13);
    CHECK((st.F[0] - f0).frobenius_norm() < 1e-10);  // zero velocity gradient
    CHECK(st.C[0].frobenius_norm() < 1e-9);          // linear reproduction

    GridField frozen = unit_grid();
    ParticleState st2 = init_state({{0.5, 0.5, 0.5}}, {1e-3}, {8e-6}, frozen);
    st2.F[0] = f0;
    frozen.velocity.assign(frozen.node_count(), Vec3{});
    const Vec3 x_before = st2.x[0];
    g2p(frozen, st2, params);
    CHECK(st2.x[0] == x_before);
    CHECK((st2.F[0] - f0).frobenius_norm() == 0.0);
}

TEST_CASE("free fall matches the analytic velocity") {
    GridField grid = unit_grid();
    ParticleState st = init_state({{0.5, 0.5, 0.5}}, {1e-3}, {8e-6}, grid);
    MaterialTable mats = MaterialTable::uniform(soft_spec(), 1);
    BoundarySet none;
    StepParams params;  // dt = 3e-4, g = (0,0,-9.8)

    mpm_step(st, grid, mats, none, params, 0.0);
    CHECK(st.v[0].z == doctest::Approx(-2.94e-3).epsilon(1e-12));

    // continue to 100 steps total
    for (int step = 1; step < 100; ++step)
        mpm_step(st, grid, mats, none, params, step * params.dt);
    const double expected = -100.0 * 9.8 * 3e-4;
    CHECK(std::fabs(st.v[0].z - expected) <= 1e-9 * std::fabs(expected));
    CHECK(std::fabs(st.v[0].x) < 1e-15);
    CHECK((st.F[0] - Mat3::identity()).frobenius_norm() < 1e-8);
}

TEST_CASE("rest state with no forces is a fixed point") {
    GridField grid = unit_grid();
    std::vector<Vec3> pos;
    std::vector<double> mass, vol;
    for (int i = 0; i < 8; ++i)
        pos.push_back(Vec3{0.45, 0.45, 0.45} + Vec3{(i & 1) * 0.05, ((i >> 1) & 1) * 0.05,
                                                    ((i >> 2) & 1) * 0.05});
    mass.assign(8, 1e-3);
    vol.assign(8, 8e-6);
    ParticleState st = init_state(pos, mass, vol, grid);
    MaterialTable mats = MaterialTable::uniform(soft_spec(), 8);
    BoundarySet none;
    StepParams params;
    params.gravity = {0, 0, 0};

    const ParticleState before = st;
    for (int step = 0; step < 5; ++step) mpm_step(st, grid, mats, none, params, step * params.dt);
    for (int i = 0; i < 8; ++i) {
        CHECK((st.x[i] - before.x[i]).norm() == 0.0);
        CHECK(st.v[i].norm() == 0.0);
        CHECK((st.F[i] - Mat3::identity()).frobenius_norm() == 0.0);
    }
}

TEST_CASE("momentum is conserved over a full step without external forces") {
    std::mt19937_64 rng(33);
    for (int scene = 0; scene < 10; ++scene) {
        GridField grid = unit_grid();
        ParticleState st = random_state(rng, grid, 60);
        // drifting cloud with mild pre-strain: stress forces are active and
        // the net momentum is a meaningful reference scale
        for (std::size_t i = 0; i < st.size(); ++i) {
            st.mass[i] = 8e-3 * oracle::urand(rng, 0.5, 2.0);
            st.v[i] += Vec3{1.0, 0.5, 0.25};
            st.F[i] = oracle::random_spd(rng, 0.97, 1.03);
        }
        MaterialTable mats = MaterialTable::uniform(soft_spec(), st.size());
        BoundarySet none;
        StepParams params;
        params.gravity = {0, 0, 0};

        const Vec3 before = total_particle_momentum(st);
        mpm_step(st, grid, mats, none, params, 0.0);
        const Vec3 after = total_particle_momentum(st);
        CHECK((after - before).norm() <= 1e-8 * before.norm());
    }
}

TEST_CASE("simulate samples the documented frame schedule") {
    SimInput in = bouncing_cube_input(soft_spec());

    const Trajectory short_run = simulate(in, 0, 10);
    CHECK(short_run.frames.size() == 1);

    const Trajectory run = simulate(in, 100, 10);
    CHECK(run.frames.size() == 11);
    CHECK(run.frames[0].time == 0.0);
    CHECK(run.frames[1].time == doctest::Approx(10 * in.params.dt));

    const Trajectory uneven = simulate(in, 105, 10);
    CHECK(uneven.frames.size() == 12);  // ceil(105/10) + 1
}

TEST_CASE("simulate is bitwise deterministic single-threaded") {
    SimInput in = bouncing_cube_input(soft_spec());
    const Trajectory a = simulate(in, 150, 10);
    const Trajectory b = simulate(in, 150, 10);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f)
        for (std::size_t p = 0; p < a.particle_count; ++p) {
            CHECK(a.frames[f].positions[p] == b.frames[f].positions[p]);
            CHECK(a.frames[f].deformation[p] == b.frames[f].deformation[p]);
        }
}

TEST_CASE("parallel transfer agrees with the single-threaded reference") {
    SimInput in = bouncing_cube_input(soft_spec());
    std::vector<StepStats> ref_stats, par_stats;

    SimulateOptions opts;
    opts.stats = &ref_stats;
    in.params.threads = 1;
    simulate(in, 200, 50, opts);

    opts.stats = &par_stats;
    in.params.threads = 4;
    simulate(in, 200, 50, opts);

    REQUIRE(ref_stats.size() == par_stats.size());
    for (std::size_t s = 0; s < ref_stats.size(); ++s) {
        CHECK(std::fabs(ref_stats[s].grid_mass - par_stats[s].grid_mass)
              <= 1e-10 * ref_stats[s].grid_mass);
        const double ref_p = std::max(ref_stats[s].grid_momentum.norm(), 1e-12);
        CHECK((ref_stats[s].grid_momentum - par_stats[s].grid_momentum).norm() <= 1e-10 * ref_p);
    }
}

TEST_CASE("gross CFL violation raises UnstableStep with the step index") {
    SimInput in = bouncing_cube_input(MaterialSpec{ElasticModel::FixedCorotated,
                                                   PlasticModel::Identity,
                                                   PhysicalParams(1e9, 0.45)});
    in.params.dt = 0.05;  // far beyond any stable step
    for (std::size_t i = 0; i < in.initial.size(); ++i)
        in.initial.v[i] = {0, 0, -5};
    try {
        simulate(in, 50, 10);
        FAIL("expected UnstableStep");
    } catch (const UnstableStep& e) {
        CHECK(e.step >= 0);
        CHECK(e.step < 50);
    }
}
