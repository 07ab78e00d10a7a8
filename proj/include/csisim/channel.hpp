#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csisim/scene.hpp"

namespace csisim {
namespace channel {

// Attenuation model: alpha = gain / d_total * exp(j*phi0). phi0 is drawn per
// path when random_initial_phase is set, except that the user reflection is
// one physical event, so all receivers share its phi0.
struct PathModelConfig {
    double gain = 1.0;
    bool random_initial_phase = true;
};

// Geometric ground truth: direct tx->rx path plus the tx->user->rx
// reflection per receiver. AoA relative to array broadside, ToF in seconds.
// Throws on user/receiver or user/transmitter collocation.
std::vector<std::vector<PathSpec>> ground_truth_paths(const Scene& scene,
                                                      const PathModelConfig& cfg,
                                                      std::uint64_t seed);

struct SynthesisConfig {
    double noise_var = 0.0;    // E[|eta|^2] per entry
    bool phase_error = true;   // per-frame common oscillator offset, U[0, 2pi)
    int frames = 34;           // U
};

// One receiver's CSI stream: H(m,n) = sum_l alpha_l *
// exp(-j*2pi*f_n*(tof_l + m*k*sin(aoa_l)/c)) * exp(-j*eps) + noise.
// Deterministic for a fixed seed regardless of thread count.
CsiStream synthesize_csi(const Scene& scene, std::span<const PathSpec> paths,
                         int receiver_id, const SynthesisConfig& cfg, std::uint64_t seed);

// All receivers; per-receiver synthesis runs on independent derived streams.
std::vector<CsiStream> synthesize_all(const Scene& scene,
                                      const std::vector<std::vector<PathSpec>>& paths,
                                      const SynthesisConfig& cfg, std::uint64_t seed);

// Noiseless frame (eps = 0) for a path set; the building block of synthesis
// and the reference for SNR calibration and enhancement measurements.
CMatrix noiseless_frame(const Scene& scene, std::span<const PathSpec> paths);

// Noise variance giving the requested SNR, defined against the mean
// per-entry power of the noiseless frame averaged over receivers.
double noise_var_for_snr(const Scene& scene,
                         const std::vector<std::vector<PathSpec>>& paths, double snr_db);

} // namespace channel
} // namespace csisim
