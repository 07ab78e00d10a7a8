// Timing comparison of the serial reference paths against the OpenMP
// kernels: MUSIC grid evaluation and the pricing oracle grid.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "csisim/channel.hpp"
#include "csisim/pricing.hpp"
#include "csisim/spectral.hpp"

using namespace csisim;

namespace {

double seconds(const std::function<void()>& fn, int repeats) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / repeats;
}

Scene bench_scene() {
    Scene s;
    s.tx_pos = {0.0, 0.0};
    s.user_pos = {3.0, 4.0};
    s.receivers = {{{7.9, 4.0}, M_PI, 0}};
    return s;
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled at build time\n");
#endif

    const Scene scene = bench_scene();
    const auto paths = channel::ground_truth_paths(scene, {}, 7);
    channel::SynthesisConfig syn;
    syn.noise_var = channel::noise_var_for_snr(scene, paths, 20.0);
    const CsiStream stream = channel::synthesize_csi(scene, paths[0], 0, syn, 7);

    const int wa = spectral::default_win_antennas(scene.n_antennas);
    const int ws = spectral::default_win_subcarriers(scene.n_subcarriers);
    std::vector<spectral::SmoothedSnapshot> snaps;
    for (const auto& f : stream.frames) snaps.push_back(spectral::spatial_smooth(f, wa, ws));
    const CMatrix r = spectral::correlation_matrix(snaps);
    const auto sub = spectral::decompose(r, static_cast<int>(stream.frames.size() *
                                                             snaps.front().x.cols()));
    const auto steer = spectral::SteeringSpec::from_scene(scene, wa, ws);
    const spectral::GridSpec grid;

    spectral::SpectrumGrid serial, parallel;
    const double t_music_serial =
        seconds([&] { serial = spectral::music_spectrum(sub, steer, grid, false); }, 3);
    const double t_music_parallel =
        seconds([&] { parallel = spectral::music_spectrum(sub, steer, grid, true); }, 3);
    const double t_music_reference = seconds(
        [&] { (void)spectral::music_spectrum_reference(sub.noise_basis, steer, grid); }, 1);
    const bool identical = (serial.values - parallel.values).cwiseAbs().maxCoeff() == 0.0;

    std::printf("music grid (%zux%zu, M'=%d):\n", serial.theta.size(), serial.tau.size(),
                steer.dim());
    std::printf("  serial kernel      %8.3f ms\n", 1e3 * t_music_serial);
    std::printf("  openmp kernel      %8.3f ms  (speedup %.2fx, bit-identical: %s)\n",
                1e3 * t_music_parallel, t_music_serial / t_music_parallel,
                identical ? "yes" : "NO");
    std::printf("  projector reference%8.3f ms\n", 1e3 * t_music_reference);

    pricing::EnvState env;
    env.u_th = 3400.0;
    const pricing::PricingGrid pgrid;
    pricing::OracleResult o_serial, o_parallel;
    const double t_oracle_serial =
        seconds([&] { o_serial = pricing::oracle_optimal_pricing(env, pgrid, false); }, 3);
    const double t_oracle_parallel =
        seconds([&] { o_parallel = pricing::oracle_optimal_pricing(env, pgrid, true); }, 3);
    const bool same = o_serial.strategy.v_r == o_parallel.strategy.v_r &&
                      o_serial.strategy.i_b == o_parallel.strategy.i_b &&
                      o_serial.u_us == o_parallel.u_us;

    std::printf("pricing oracle grid:\n");
    std::printf("  serial             %8.3f ms\n", 1e3 * t_oracle_serial);
    std::printf("  openmp             %8.3f ms  (speedup %.2fx, identical: %s)\n",
                1e3 * t_oracle_parallel, t_oracle_serial / t_oracle_parallel,
                same ? "yes" : "NO");
    return identical && same ? 0 : 1;
}
