#pragma once

#include <span>
#include <vector>

#include "csisim/scene.hpp"

namespace csisim {
namespace spectral {

// One CSI frame rearranged into stacked sliding sub-windows: column j holds
// the vectorized window at offset (dm, dn), row (m'*win_subcarriers + n')
// holds window element (m', n').
struct SmoothedSnapshot {
    CMatrix x;              // (win_a * win_s) x n_windows
    int win_antennas = 0;   // w_a
    int win_subcarriers = 0;// w_s
    int src_antennas = 0;
    int src_subcarriers = 0;
};

SmoothedSnapshot spatial_smooth(const CMatrix& frame, int win_antennas, int win_subcarriers);

// R = (1/(U*N')) * sum_u X_u X_u^H, forced Hermitian.
CMatrix correlation_matrix(std::span<const SmoothedSnapshot> snapshots);

struct EigResult {
    Eigen::VectorXd eigenvalues;  // descending
    CMatrix eigenvectors;         // columns match eigenvalues
};

// Hermitian eigendecomposition, eigenvalues descending. Throws if the input
// is not Hermitian within tolerance.
EigResult eig_hermitian(const CMatrix& r, double hermitian_tol = 1e-9);

// Number of dominant eigenvalues by the description-length criterion.
// Tiny eigenvalues are clamped to 1e-12 * lambda_max before the log.
int mdl_order(const Eigen::VectorXd& eigenvalues_desc, int observations);

struct Subspaces {
    Eigen::VectorXd eigenvalues;
    CMatrix signal_basis;   // E_S, M' x L
    CMatrix noise_basis;    // E_N, M' x (M' - L)
    int n_sources = 0;      // L
};

// eig + MDL in one step.
Subspaces decompose(const CMatrix& r, int observations);

struct GridSpec {
    double theta_min = -M_PI / 2, theta_max = M_PI / 2, theta_step = M_PI / 180.0; // radians
    double tau_min = 0.0, tau_max = 200e-9, tau_step = 1e-9;                       // seconds
    std::vector<double> theta_values() const;
    std::vector<double> tau_values() const;
};

// Phase model of the smoothed layout. The steering vector is anchored to the
// first sub-window and uses the exact per-subcarrier frequencies there:
//   a[(m', n')] = exp(-j*2pi*f_{n'}*(tau + m'*k*sin(theta)/c)).
struct SteeringSpec {
    std::vector<double> window_freqs; // first w_s subcarrier frequencies, Hz
    double antenna_spacing = 0.0;     // meters
    int win_antennas = 0;

    static SteeringSpec from_scene(const Scene& scene, int win_antennas, int win_subcarriers);
    void steering(double theta, double tau, cdouble* out) const; // length win_a * |freqs|
    int dim() const { return win_antennas * static_cast<int>(window_freqs.size()); }
};

struct SpectrumGrid {
    std::vector<double> theta; // rows
    std::vector<double> tau;   // cols
    Eigen::MatrixXd values;    // theta.size() x tau.size()
};

// Pseudo-spectrum P(theta, tau) = 1 / (a^H E_N E_N^H a), evaluated as
// M' - |E_S^H a|^2 with precomputed per-axis phase factors. Cells are
// independent, so the parallel result is bit-identical to the serial one.
SpectrumGrid music_spectrum(const Subspaces& sub, const SteeringSpec& steer,
                            const GridSpec& grid, bool parallel = true);

// Literal projector form used as the reference implementation in tests.
SpectrumGrid music_spectrum_reference(const CMatrix& noise_basis, const SteeringSpec& steer,
                                      const GridSpec& grid);

struct Peak {
    double theta = 0.0;
    double tau = 0.0;
    double value = 0.0;
};

struct PathEstimate {
    std::vector<Peak> peaks; // sorted by spectrum value descending
    GridSpec grid;
    bool shortfall = false;  // fewer local maxima than requested
};

// The `count` highest 8-neighborhood local maxima; equal values are ordered
// by (theta, tau) lexicographically.
PathEstimate peak_estimates(const SpectrumGrid& spectrum, int count);

struct EstimationConfig {
    int win_antennas = 0;     // 0: max(2, M/2)
    int win_subcarriers = 0;  // 0: min(16, N)
    GridSpec grid;
    bool count_sub_snapshots = true; // MDL observations = U*N' (else U)
};

// Full single-receiver chain: smooth -> correlate -> subspaces -> spectrum
// -> peaks.
struct ReceiverEstimate {
    PathEstimate estimate;
    Subspaces subspaces;
    SpectrumGrid spectrum;
};

ReceiverEstimate estimate_paths(const CsiStream& stream, const Scene& scene,
                                const EstimationConfig& cfg, bool parallel = true);

int default_win_antennas(int m);
int default_win_subcarriers(int n);

} // namespace spectral
} // namespace csisim
