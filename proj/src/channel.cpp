#include "csisim/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "csisim/rng.hpp"

namespace csisim {
namespace channel {

namespace {

constexpr std::uint64_t kPhaseStream = 101;
constexpr std::uint64_t kNoiseStream = 102;
constexpr std::uint64_t kEpsStream = 103;
constexpr std::uint64_t kUserPhaseStream = 104;

} // namespace

std::vector<std::vector<PathSpec>> ground_truth_paths(const Scene& scene,
                                                      const PathModelConfig& cfg,
                                                      std::uint64_t seed) {
    scene.validate();
    Rng master(seed);
    // One reflection phase for the user across all receivers.
    double user_phi0 = cfg.random_initial_phase
                           ? master.child(kUserPhaseStream).uniform(0.0, 2.0 * M_PI)
                           : 0.0;

    std::vector<std::vector<PathSpec>> out;
    out.reserve(scene.receivers.size());
    for (std::size_t q = 0; q < scene.receivers.size(); ++q) {
        const auto& rx = scene.receivers[q];
        const double d_tx_rx = distance(scene.tx_pos, rx.pos);
        const double d_tx_us = distance(scene.tx_pos, scene.user_pos);
        const double d_us_rx = distance(scene.user_pos, rx.pos);
        if (d_us_rx < 1e-9 || d_tx_us < 1e-9)
            throw std::invalid_argument("ground_truth_paths: user collocated with a node (degenerate geometry)");
        if (d_tx_rx < 1e-9)
            throw std::invalid_argument("ground_truth_paths: transmitter collocated with a receiver");

        Rng rng = master.child({kPhaseStream, static_cast<std::uint64_t>(q)});

        PathSpec direct;
        direct.kind = PathKind::direct;
        direct.aoa = array_angle(bearing(rx.pos, scene.tx_pos), rx.orientation);
        direct.tof = d_tx_rx / kPropagationSpeed;
        double phi_d = cfg.random_initial_phase ? rng.uniform(0.0, 2.0 * M_PI) : 0.0;
        direct.attenuation = std::polar(cfg.gain / d_tx_rx, phi_d);

        PathSpec user;
        user.kind = PathKind::user_reflection;
        user.aoa = array_angle(bearing(rx.pos, scene.user_pos), rx.orientation);
        user.tof = (d_tx_us + d_us_rx) / kPropagationSpeed;
        user.attenuation = std::polar(cfg.gain / (d_tx_us + d_us_rx), user_phi0);

        out.push_back({direct, user});
    }
    return out;
}

CMatrix noiseless_frame(const Scene& scene, std::span<const PathSpec> paths) {
    const auto freqs = scene.subcarrier_frequencies();
    const double k = scene.spacing();
    CMatrix h = CMatrix::Zero(scene.n_antennas, scene.n_subcarriers);
    for (const auto& p : paths) {
        const double kappa = k * std::sin(p.aoa) / kPropagationSpeed;
        for (int m = 0; m < scene.n_antennas; ++m) {
            const double delay = p.tof + m * kappa;
            for (int n = 0; n < scene.n_subcarriers; ++n) {
                h(m, n) += p.attenuation * std::polar(1.0, -2.0 * M_PI * freqs[static_cast<std::size_t>(n)] * delay);
            }
        }
    }
    return h;
}

CsiStream synthesize_csi(const Scene& scene, std::span<const PathSpec> paths,
                         int receiver_id, const SynthesisConfig& cfg, std::uint64_t seed) {
    scene.validate();
    if (cfg.frames < 1) throw std::invalid_argument("synthesize_csi: frames must be >= 1");
    if (cfg.noise_var < 0.0) throw std::invalid_argument("synthesize_csi: noise_var must be >= 0");

    const CMatrix base = noiseless_frame(scene, paths);
    const double noise_sd = std::sqrt(cfg.noise_var / 2.0);

    CsiStream stream;
    stream.receiver_id = receiver_id;
    stream.noise_var = cfg.noise_var;
    stream.frames.reserve(static_cast<std::size_t>(cfg.frames));
    stream.timestamps.reserve(static_cast<std::size_t>(cfg.frames));
    stream.phase_error.reserve(static_cast<std::size_t>(cfg.frames));

    Rng master(seed);
    for (int u = 0; u < cfg.frames; ++u) {
        const auto tag = static_cast<std::uint64_t>(u);
        double eps = cfg.phase_error ? master.child({kEpsStream, tag}).uniform(0.0, 2.0 * M_PI) : 0.0;
        CMatrix frame = base * std::polar(1.0, -eps);
        if (cfg.noise_var > 0.0) {
            Rng noise = master.child({kNoiseStream, tag});
            for (int m = 0; m < frame.rows(); ++m)
                for (int n = 0; n < frame.cols(); ++n)
                    frame(m, n) += cdouble(noise_sd * noise.normal(), noise_sd * noise.normal());
        }
        stream.frames.push_back(std::move(frame));
        stream.timestamps.push_back(u / scene.packet_rate);
        stream.phase_error.push_back(eps);
    }
    return stream;
}

std::vector<CsiStream> synthesize_all(const Scene& scene,
                                      const std::vector<std::vector<PathSpec>>& paths,
                                      const SynthesisConfig& cfg, std::uint64_t seed) {
    if (paths.size() != scene.receivers.size())
        throw std::invalid_argument("synthesize_all: one path list per receiver required");
    std::vector<CsiStream> out(paths.size());
    Rng master(seed);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t q = 0; q < paths.size(); ++q) {
        Rng rx_rng = master.child(static_cast<std::uint64_t>(q));
        out[q] = synthesize_csi(scene, paths[q], scene.receivers[q].id, cfg, rx_rng.next_u64());
    }
    return out;
}

double noise_var_for_snr(const Scene& scene,
                         const std::vector<std::vector<PathSpec>>& paths, double snr_db) {
    double power = 0.0;
    for (const auto& p : paths) power += noiseless_frame(scene, p).squaredNorm();
    power /= static_cast<double>(paths.size() * scene.n_antennas * scene.n_subcarriers);
    return power / std::pow(10.0, snr_db / 10.0);
}

} // namespace channel
} // namespace csisim
