#include "mpmgs/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mpmgs/errors.hpp"
#include "mpmgs/parallel.hpp"

namespace mpmgs {

namespace {

constexpr double kLogEMin = 0.0;          // E >= 1 Pa
constexpr double kLogEMax = 27.631021116; // E <= 1e12 Pa
constexpr double kNuGuard = 2e-9;

int argmax_first(const double* values, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (values[i] > values[best]) best = i;  // strict: ties keep the first index
    return best;
}

PhysicalParams params_of(const MaterialLogits& logits, const LogitEntry& row) {
    return PhysicalParams(map_young(row.log_e), map_poisson(row.nu_logit),
                          logits.friction_angle_deg, logits.yield_stress);
}

std::array<double, kElasticModelCount> softmax3(const std::array<double, 3>& z, double tau) {
    std::array<double, 3> s{};
    const double m = std::max({z[0], z[1], z[2]});
    double sum = 0;
    for (int i = 0; i < 3; ++i) sum += (s[i] = std::exp((z[i] - m) / tau));
    for (double& v : s) v /= sum;
    return s;
}

std::array<double, kPlasticModelCount> softmax4(const std::array<double, 4>& z, double tau) {
    std::array<double, 4> s{};
    const double m = std::max({z[0], z[1], z[2], z[3]});
    double sum = 0;
    for (int i = 0; i < 4; ++i) sum += (s[i] = std::exp((z[i] - m) / tau));
    for (double& v : s) v /= sum;
    return s;
}

// Windowed loss: simulated stage frames 1..M against the reference samples
// of the same global indices (reference sample 0 is the initial state).
double window_loss(const Trajectory& stage_traj, const Trajectory& reference,
                   const StageWindow& w) {
    const std::size_t first_ref = 1 + static_cast<std::size_t>(w.stage) * w.frames;
    if (reference.frames.size() < first_ref + w.frames)
        throw ShapeMismatch("reference trajectory does not cover the stage window");
    if (reference.particle_count != stage_traj.particle_count)
        throw ShapeMismatch("reference and simulated particle counts differ");
    const std::size_t n = stage_traj.particle_count;
    double acc = 0.0;
    for (int f = 0; f < w.frames; ++f) {
        const auto& sim = stage_traj.frames.at(1 + f).positions;
        const auto& ref = reference.frames[first_ref + f].positions;
        for (std::size_t p = 0; p < n; ++p) acc += (sim[p] - ref[p]).squared_norm();
    }
    return acc / (static_cast<double>(w.frames) * static_cast<double>(n));
}

double run_window(const SimInput& input, const ParticleState& start, const MaterialTable& mats,
                  const Trajectory& reference, const StageWindow& w, ParticleState* end_state) {
    SimInput local;
    local.grid = input.grid;
    local.materials = mats;
    local.boundaries = input.boundaries;
    local.params = input.params;
    local.params.threads = 1;  // FD probes stay single-threaded and bitwise-reproducible
    SimulateOptions opts;
    opts.record_deformation = false;  // the loss reads positions only
    const Trajectory traj =
        simulate_from(local, start, w.frames * w.stride, w.stride, end_state, opts);
    return window_loss(traj, reference, w);
}

}  // namespace

MaterialLogits MaterialLogits::init(std::size_t neighborhoods, double youngs_modulus,
                                    double poisson_ratio, double tie_bias) {
    MaterialLogits l;
    LogitEntry row;
    row.elastic_logits[0] = tie_bias;
    row.plastic_logits[0] = tie_bias;
    row.log_e = unmap_young(youngs_modulus);
    row.nu_logit = unmap_poisson(poisson_ratio);
    l.rows.assign(neighborhoods, row);
    return l;
}

double map_young(double log_e) {
    return std::exp(std::min(std::max(log_e, kLogEMin), kLogEMax));
}

double unmap_young(double youngs_modulus) {
    return std::log(std::min(std::max(youngs_modulus, 1.0), 1e12));
}

double map_poisson(double nu_logit) {
    double s = 1.0 / (1.0 + std::exp(-nu_logit));
    s = std::min(std::max(s, kNuGuard), 1.0 - kNuGuard);
    return 0.5 * s;
}

double unmap_poisson(double poisson_ratio) {
    const double s = std::min(std::max(2.0 * poisson_ratio, kNuGuard), 1.0 - kNuGuard);
    return std::log(s / (1.0 - s));
}

MaterialSpec select_material(const MaterialLogits& logits, int neighborhood) {
    const LogitEntry& row = logits.rows.at(neighborhood);
    MaterialSpec spec;
    spec.elastic = static_cast<ElasticModel>(argmax_first(row.elastic_logits.data(),
                                                          kElasticModelCount));
    spec.plastic = static_cast<PlasticModel>(argmax_first(row.plastic_logits.data(),
                                                          kPlasticModelCount));
    spec.params = params_of(logits, row);
    return spec;
}

MaterialTable hard_material_table(const MaterialLogits& logits, const Partition& partition) {
    MaterialTable t;
    t.entries.reserve(logits.rows.size());
    for (std::size_t i = 0; i < logits.rows.size(); ++i)
        t.entries.push_back(BlendedMaterial::from(select_material(logits, static_cast<int>(i))));
    t.particle_material = partition.assignment;
    return t;
}

double trajectory_loss(const Trajectory& simulated, const Trajectory& reference) {
    if (simulated.frames.size() != reference.frames.size())
        throw ShapeMismatch("trajectory_loss: frame counts differ");
    if (simulated.particle_count != reference.particle_count)
        throw ShapeMismatch("trajectory_loss: particle counts differ");
    if (simulated.frames.empty()) return 0.0;
    const std::size_t n = simulated.particle_count;
    double acc = 0.0;
    for (std::size_t f = 0; f < simulated.frames.size(); ++f) {
        const auto& a = simulated.frames[f].positions;
        const auto& b = reference.frames[f].positions;
        for (std::size_t p = 0; p < n; ++p) acc += (a[p] - b[p]).squared_norm();
    }
    return acc / (static_cast<double>(simulated.frames.size()) * static_cast<double>(n));
}

GradientResult estimate_gradients(const SimInput& input, const ParticleState& start,
                                  const Partition& partition, const MaterialLogits& logits,
                                  const Trajectory& reference, const StageWindow& window,
                                  double fd_step, int threads) {
    const std::size_t nb = logits.rows.size();
    if (partition.neighborhood_count() != nb)
        throw ShapeMismatch("estimate_gradients: partition/logits neighborhood counts differ");

    const MaterialTable base = hard_material_table(logits, partition);

    GradientResult result;
    result.rows.resize(nb);
    result.loss = run_window(input, start, base, reference, window, &result.end_state);

    // 9 central-difference probes per neighborhood: 3 elastic blend weights,
    // 4 plastic blend weights, log_e, nu_logit; 2 simulations each.
    const int coords = 9;
    const std::size_t probes = nb * coords * 2;
    std::vector<double> probe_loss(probes, 0.0);

    parallel_for_chunks(probes, threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t t = b; t < e; ++t) {
            const std::size_t i = t / (coords * 2);           // neighborhood
            const int coord = static_cast<int>((t / 2) % coords);
            const double sign = (t % 2 == 0) ? 1.0 : -1.0;

            MaterialTable mats = base;
            BlendedMaterial& entry = mats.entries[i];
            if (coord < 3) {
                entry.elastic_w[coord] += sign * fd_step;
            } else if (coord < 7) {
                entry.plastic_w[coord - 3] += sign * fd_step;
            } else {
                LogitEntry row = logits.rows[i];
                if (coord == 7) row.log_e += sign * fd_step;
                else row.nu_logit += sign * fd_step;
                entry.params = params_of(logits, row);
            }
            probe_loss[t] = run_window(input, start, mats, reference, window, nullptr);
        }
    });

    for (std::size_t i = 0; i < nb; ++i) {
        double dl_dw_el[3], dl_dw_pl[4], dl_cont[2];
        for (int c = 0; c < coords; ++c) {
            const std::size_t t = (i * coords + c) * 2;
            const double g = (probe_loss[t] - probe_loss[t + 1]) / (2.0 * fd_step);
            if (c < 3) dl_dw_el[c] = g;
            else if (c < 7) dl_dw_pl[c - 3] = g;
            else dl_cont[c - 7] = g;
        }
        // straight-through: chain blend-weight sensitivities through the
        // softmax Jacobian at the configured temperature
        const auto s_el = softmax3(logits.rows[i].elastic_logits, logits.temperature);
        const auto s_pl = softmax4(logits.rows[i].plastic_logits, logits.temperature);
        NeighborhoodGradient& out = result.rows[i];
        for (int l = 0; l < 3; ++l) {
            double g = 0;
            for (int j = 0; j < 3; ++j)
                g += dl_dw_el[j] * s_el[j] * ((j == l ? 1.0 : 0.0) - s_el[l]);
            out.g[l] = g / logits.temperature;
        }
        for (int l = 0; l < 4; ++l) {
            double g = 0;
            for (int j = 0; j < 4; ++j)
                g += dl_dw_pl[j] * s_pl[j] * ((j == l ? 1.0 : 0.0) - s_pl[l]);
            out.g[3 + l] = g / logits.temperature;
        }
        out.g[7] = dl_cont[0];
        out.g[8] = dl_cont[1];
    }
    return result;
}

double full_horizon_loss(const SimInput& input, const Partition& partition,
                         const MaterialLogits& logits, const Trajectory& reference,
                         const TrainConfig& cfg) {
    const int total_frames = cfg.stages * cfg.frames_per_stage;
    const MaterialTable mats = hard_material_table(logits, partition);
    SimInput local;
    local.grid = input.grid;
    local.materials = mats;
    local.boundaries = input.boundaries;
    local.params = input.params;
    local.params.threads = 1;
    SimulateOptions opts;
    opts.record_deformation = false;
    const Trajectory traj = simulate_from(local, input.initial, total_frames * cfg.sample_stride,
                                          cfg.sample_stride, nullptr, opts);

    if (reference.frames.size() < traj.frames.size())
        throw ShapeMismatch("reference trajectory shorter than the training horizon");
    Trajectory ref_slice;
    ref_slice.particle_count = reference.particle_count;
    ref_slice.frames.assign(reference.frames.begin(),
                            reference.frames.begin() + traj.frames.size());
    return trajectory_loss(traj, ref_slice);
}

TrainResult train(const SimInput& input, const Partition& partition, MaterialLogits logits,
                  const Trajectory& reference, const TrainConfig& cfg) {
    if (reference.particle_count != input.initial.size())
        throw ShapeMismatch("train: reference particle count differs from the scene");
    const std::size_t needed_frames =
        1 + static_cast<std::size_t>(cfg.stages) * cfg.frames_per_stage;
    if (reference.frames.size() < needed_frames)
        throw ValidationError("train: reference must cover stages * frames_per_stage samples");
    if (cfg.stages < 1 || cfg.frames_per_stage < 1 || cfg.internal_iters < 1
        || cfg.outer_iters < 1 || cfg.sample_stride < 1)
        throw ValidationError("train: schedule values must be positive");

    logits.temperature = cfg.temperature;

    TrainResult result;
    result.initial_full_loss = full_horizon_loss(input, partition, logits, reference, cfg);

    const std::size_t nb = logits.rows.size();
    std::vector<std::array<double, 9>> adam_m(nb, std::array<double, 9>{});
    std::vector<std::array<double, 9>> adam_v(nb, std::array<double, 9>{});
    long adam_t = 0;

    for (int outer = 0; outer < cfg.outer_iters; ++outer) {
        ParticleState state = input.initial;
        for (int stage = 0; stage < cfg.stages; ++stage) {
            const ParticleState checkpoint = state;  // end state of the previous stage
            ParticleState stage_end;
            for (int internal = 0; internal < cfg.internal_iters; ++internal) {
                if (cfg.on_internal_start)
                    cfg.on_internal_start(outer, stage, internal, checkpoint);
                StageWindow window{stage, cfg.frames_per_stage, cfg.sample_stride};
                GradientResult grad =
                    estimate_gradients(input, checkpoint, partition, logits, reference, window,
                                       cfg.fd_step, cfg.threads);

                ++adam_t;
                const double bc1 = 1.0 - std::pow(cfg.adam_beta1, adam_t);
                const double bc2 = 1.0 - std::pow(cfg.adam_beta2, adam_t);
                for (std::size_t i = 0; i < nb; ++i) {
                    double* fields[9] = {
                        &logits.rows[i].elastic_logits[0], &logits.rows[i].elastic_logits[1],
                        &logits.rows[i].elastic_logits[2], &logits.rows[i].plastic_logits[0],
                        &logits.rows[i].plastic_logits[1], &logits.rows[i].plastic_logits[2],
                        &logits.rows[i].plastic_logits[3], &logits.rows[i].log_e,
                        &logits.rows[i].nu_logit};
                    for (int c = 0; c < 9; ++c) {
                        const double g = grad.rows[i].g[c];
                        adam_m[i][c] = cfg.adam_beta1 * adam_m[i][c] + (1 - cfg.adam_beta1) * g;
                        adam_v[i][c] =
                            cfg.adam_beta2 * adam_v[i][c] + (1 - cfg.adam_beta2) * g * g;
                        const double mh = adam_m[i][c] / bc1;
                        const double vh = adam_v[i][c] / bc2;
                        *fields[c] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
                    }
                }
                result.log.push_back({outer, stage, internal, grad.loss});
                stage_end = std::move(grad.end_state);
            }
            state = std::move(stage_end);
        }
    }

    result.final_full_loss = full_horizon_loss(input, partition, logits, reference, cfg);
    result.logits = std::move(logits);
    return result;
}

void write_material_assignment(const std::string& path, const MaterialLogits& logits,
                               const Partition& partition) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "# neighborhood elastic plastic E nu friction_angle yield_stress center_particle "
          "particle_count\n";
    std::vector<int> counts(logits.rows.size(), 0);
    for (int a : partition.assignment) counts.at(a)++;
    os.precision(12);
    for (std::size_t i = 0; i < logits.rows.size(); ++i) {
        const MaterialSpec spec = select_material(logits, static_cast<int>(i));
        os << i << ' ' << to_string(spec.elastic) << ' ' << to_string(spec.plastic) << ' '
           << spec.params.youngs_modulus << ' ' << spec.params.poisson_ratio << ' '
           << spec.params.friction_angle_deg << ' ' << spec.params.yield_stress << ' '
           << partition.centers[i] << ' ' << counts[i] << '\n';
    }
    if (!os) throw IoError("write to '" + path + "' failed");
}

void write_loss_log(const std::string& path, const std::vector<LossRecord>& log) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "outer,stage,internal,loss\n";
    os.precision(12);
    for (const LossRecord& r : log)
        os << r.outer << ',' << r.stage << ',' << r.internal << ',' << r.loss << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace mpmgs
