#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpmgs/bench.hpp"
#include "mpmgs/errors.hpp"
#include "mpmgs/estimate.hpp"
#include "mpmgs/gaussian.hpp"
#include "mpmgs/mpm.hpp"
#include "mpmgs/scene.hpp"

namespace {

// exit codes: 0 success, 2 validation, 3 runtime instability, 4 i/o
constexpr int kExitValidation = 2;
constexpr int kExitUnstable = 3;
constexpr int kExitIo = 4;

int default_threads() {
    if (const char* env = std::getenv("MPMGS_THREADS")) {
        const int t = std::atoi(env);
        if (t >= 1) return t;
    }
    return 1;
}

int run_simulate(const std::string& scene_path, const std::string& out_path, int steps_override,
                 int sample_override, int threads, const std::string& summary_path) {
    mpmgs::SceneConfig cfg = mpmgs::load_scene(scene_path);
    mpmgs::SceneRuntime rt = mpmgs::build_runtime(cfg, true);
    rt.sim.params.threads = threads;

    const int steps = steps_override >= 0 ? steps_override : cfg.total_steps();
    const int sample_every = sample_override >= 1 ? sample_override : cfg.sample_every;

    const auto t0 = std::chrono::steady_clock::now();
    const mpmgs::Trajectory traj = mpmgs::simulate(rt.sim, steps, sample_every);
    const auto t1 = std::chrono::steady_clock::now();
    mpmgs::export_frames(traj, rt.kernels, out_path);

    const double wall = std::chrono::duration<double>(t1 - t0).count();
    char summary[256];
    std::snprintf(summary, sizeof(summary),
                  "simulate: steps=%d frames=%zu particles=%zu wall_seconds=%.3f", steps,
                  traj.frames.size(), traj.particle_count, wall);
    std::cout << summary << "\n";
    if (!summary_path.empty()) {
        std::ofstream os(summary_path);
        if (!os) throw mpmgs::IoError("cannot open summary file '" + summary_path + "'");
        os << summary << "\n";
    }
    return 0;
}

int run_estimate(const std::string& scene_path, const std::string& reference_path,
                 const std::string& out_path, const std::string& loss_log_path,
                 mpmgs::TrainConfig cfg, int centers_flag, int neighborhood_size,
                 double init_e, double init_nu, int stride_flag) {
    mpmgs::SceneConfig scene = mpmgs::load_scene(scene_path);
    mpmgs::SceneRuntime rt = mpmgs::build_runtime(scene, false);
    if (stride_flag >= 1)
        cfg.sample_stride = stride_flag;
    else
        cfg.sample_stride = scene.sample_every;

    const mpmgs::FrameData ref_data = mpmgs::read_frames(reference_path);
    if (ref_data.kernel_count != rt.sim.initial.size())
        throw mpmgs::ShapeMismatch("reference kernel count "
                                   + std::to_string(ref_data.kernel_count)
                                   + " does not match the scene's particle count "
                                   + std::to_string(rt.sim.initial.size()));
    mpmgs::Trajectory reference;
    reference.particle_count = ref_data.kernel_count;
    reference.frames.resize(ref_data.frames.size());
    for (std::size_t f = 0; f < ref_data.frames.size(); ++f) {
        reference.frames[f].time = f * cfg.sample_stride * rt.sim.params.dt;
        reference.frames[f].positions = ref_data.frames[f].centers;
    }

    const std::size_t n = rt.sim.initial.size();
    int centers = centers_flag;
    if (centers < 1)
        centers = std::max(1, static_cast<int>(n / std::max(1, neighborhood_size)));
    centers = std::min<int>(centers, static_cast<int>(n));

    const std::vector<int> center_idx = mpmgs::fps_partition(rt.sim.initial.x, centers);
    const mpmgs::Partition partition =
        mpmgs::knn_assign(rt.sim.initial.x, center_idx, neighborhood_size);

    mpmgs::MaterialLogits logits =
        mpmgs::MaterialLogits::init(partition.neighborhood_count(), init_e, init_nu);

    const mpmgs::TrainResult result =
        mpmgs::train(rt.sim, partition, std::move(logits), reference, cfg);

    mpmgs::write_material_assignment(out_path, result.logits, partition);
    if (!loss_log_path.empty()) mpmgs::write_loss_log(loss_log_path, result.log);

    std::printf("estimate: neighborhoods=%zu records=%zu initial_loss=%.6e final_loss=%.6e\n",
                partition.neighborhood_count(), result.log.size(), result.initial_full_loss,
                result.final_full_loss);
    return 0;
}

int run_render(const std::string& frames_path, const std::string& out_dir, char axis_char,
               int resolution) {
    const mpmgs::FrameData data = mpmgs::read_frames(frames_path);
    const int axis = axis_char == 'x' ? 0 : (axis_char == 'y' ? 1 : 2);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw mpmgs::IoError("cannot create output directory '" + out_dir + "'");
    const std::vector<double> opacities;  // frame files carry no opacity; use 1
    for (std::size_t f = 0; f < data.frames.size(); ++f) {
        const mpmgs::Image img =
            mpmgs::splat_preview(data.frames[f], opacities, axis, resolution);
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%05zu.pgm", f);
        mpmgs::write_pgm(img, out_dir + "/" + name);
    }
    std::printf("render: frames=%zu resolution=%d axis=%c out=%s\n", data.frames.size(),
                resolution, axis_char, out_dir.c_str());
    return 0;
}

int run_bench_cmd(std::size_t particles, int steps, int threads) {
    const mpmgs::BenchReport rep = mpmgs::run_bench(particles, steps, threads);
    std::printf("forward-only benchmark: %zu particles, %d steps, %d thread(s)\n", rep.particles,
                rep.steps, threads);
    std::printf("  wall time        %.3f s\n", rep.elapsed_seconds);
    std::printf("  peak resident    %.1f MB\n", rep.peak_rss_mb);
    std::printf("  throughput       %.3e particle-steps/s\n", rep.particle_steps_per_second);
    std::printf("BENCH particles=%zu steps=%d seconds=%.4f peak_rss_mb=%.1f\n", rep.particles,
                rep.steps, rep.elapsed_seconds, rep.peak_rss_mb);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MLS-MPM simulation and per-neighborhood material estimation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    int threads = default_threads();
    app.add_option("--threads", threads, "worker thread count (default 1 or MPMGS_THREADS)")
        ->check(CLI::PositiveNumber);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a scene and write a frame file");
    std::string scene_path, out_path = "frames.bin", summary_path;
    int steps_override = -1, sample_override = -1;
    sim->add_option("--scene,-s", scene_path, "scene config (JSON)")->required();
    sim->add_option("--out,-o", out_path, "output frame file");
    sim->add_option("--steps", steps_override, "override step count");
    sim->add_option("--sample-every", sample_override, "override frame sampling stride");
    sim->add_option("--summary", summary_path, "also write the run summary to this file");

    // estimate
    auto* est = app.add_subcommand("estimate",
                                   "fit per-neighborhood materials to a reference trajectory");
    std::string est_scene, reference_path, materials_out = "materials.txt", loss_log_path;
    mpmgs::TrainConfig tcfg;
    int centers_flag = -1, neighborhood_size = 32, stride_flag = -1;
    double init_e = 1e5, init_nu = 0.3;
    est->add_option("--scene,-s", est_scene, "scene config (JSON)")->required();
    est->add_option("--reference,-r", reference_path, "reference frame file")->required();
    est->add_option("--out,-o", materials_out, "material assignment output");
    est->add_option("--loss-log", loss_log_path, "per-iteration loss log (CSV)");
    est->add_option("--stages", tcfg.stages, "stage count G")->check(CLI::PositiveNumber);
    est->add_option("--frames", tcfg.frames_per_stage, "frames per stage M")
        ->check(CLI::PositiveNumber);
    est->add_option("--internal", tcfg.internal_iters, "internal iterations per stage")
        ->check(CLI::PositiveNumber);
    est->add_option("--outer", tcfg.outer_iters, "outer iterations")->check(CLI::PositiveNumber);
    est->add_option("--stride", stride_flag, "steps between frames (default: scene sample_every)");
    est->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
    est->add_option("--temperature", tcfg.temperature, "straight-through softmax temperature");
    est->add_option("--fd-step", tcfg.fd_step, "finite-difference half-width");
    est->add_option("--centers", centers_flag, "neighborhood count (default: particles/k)");
    est->add_option("--k", neighborhood_size, "nominal neighborhood size");
    est->add_option("--init-e", init_e, "initial Young's modulus");
    est->add_option("--init-nu", init_nu, "initial Poisson ratio");

    // render
    auto* ren = app.add_subcommand("render", "write grayscale previews of a frame file");
    std::string frames_path, out_dir = "preview";
    std::string axis = "z";
    int resolution = 256;
    ren->add_option("--frames,-f", frames_path, "frame file")->required();
    ren->add_option("--out-dir,-o", out_dir, "output directory");
    ren->add_option("--axis", axis, "projection axis (x, y or z)")
        ->check(CLI::IsMember({"x", "y", "z"}));
    ren->add_option("--resolution", resolution, "image size in pixels")
        ->check(CLI::PositiveNumber);

    // bench
    auto* ben = app.add_subcommand("bench", "forward-only throughput benchmark");
    std::size_t bench_particles = 0;
    int bench_steps = 0;
    ben->add_option("particles", bench_particles, "particle count")
        ->required()
        ->check(CLI::PositiveNumber);
    ben->add_option("steps", bench_steps, "step count")->required()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (sim->parsed())
            return run_simulate(scene_path, out_path, steps_override, sample_override, threads,
                                summary_path);
        if (est->parsed()) {
            tcfg.threads = threads;
            return run_estimate(est_scene, reference_path, materials_out, loss_log_path, tcfg,
                                centers_flag, neighborhood_size, init_e, init_nu, stride_flag);
        }
        if (ren->parsed()) return run_render(frames_path, out_dir, axis[0], resolution);
        if (ben->parsed()) return run_bench_cmd(bench_particles, bench_steps, threads);
    } catch (const mpmgs::UnstableStep& e) {
        std::cerr << "error (unstable): " << e.what() << "\n";
        return kExitUnstable;
    } catch (const mpmgs::ParseError& e) {
        std::cerr << "error (parse): " << e.what() << "\n";
        return kExitIo;
    } catch (const mpmgs::IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kExitIo;
    } catch (const mpmgs::Error& e) {
        std::cerr << "error (validation): " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
