#pragma once

#include <span>
#include <vector>

#include "csisim/scene.hpp"
#include "csisim/spectral.hpp"

namespace csisim {
namespace perception {

struct UserLocation {
    Vec2 pos;
    double residual = 0.0; // meters, combined fit residual
};

struct LocalizationConfig {
    double margin = 3.0;        // search box beyond node bounding box, meters
    double coarse_step = 0.25;  // meters
    int refine_levels = 3;      // each level shrinks step by 5x
    double tof_weight = 1.0;    // weight of the ellipse residual (1/m^2 on meters^2)
    int max_candidates_per_rx = 3;
    // Direct-path suppression: peaks within both windows of the (known)
    // tx->rx parameters are not user candidates. The direct paths of all
    // receivers triangulate exactly to the transmitter, so residual
    // minimization alone cannot reject them.
    double direct_theta_window = deg_to_rad(3.0);
    double direct_tau_window = 3e-9;
    double min_node_distance = 0.5; // reject fits collapsing onto tx/rx, meters
};

// Position minimizing sum_q [bearing_residual^2 + w * ellipse_residual^2]
// for one chosen (aoa, tof) per receiver. Throws on fewer than two
// receivers or an all-parallel bearing layout.
UserLocation localize_user(std::span<const spectral::Peak> user_peaks, const Scene& scene,
                           const LocalizationConfig& cfg = {});

// Chooses the per-receiver peak combination with the smallest triangulation
// residual, then refines. This is how the user-induced path is told apart
// from the direct and static paths.
struct UserPathSelection {
    std::vector<spectral::Peak> peaks; // one per receiver
    UserLocation location;
};

UserPathSelection select_user_paths(std::span<const spectral::PathEstimate> estimates,
                                    const Scene& scene, const LocalizationConfig& cfg = {});

// Large-scale scores S1_q = min_q(D_q) / D_q, where D_q is the distance from
// the user to the line through tx and rx_q, clamped below at 0.05 m.
std::vector<double> large_scale_scores(const UserLocation& user, const Scene& scene);

// P[u] = |sum_{m,n} w_{m,n}(theta_user) H_u(m,n)|^2 with
// w = exp(+j*2pi*f_n*m*k*sin(theta_user)/c).
std::vector<double> beam_power_series(const CsiStream& stream, double theta_user,
                                      const Scene& scene);

// S2_q = unbiased variance of the power series, normalized by the maximum.
// All-zero variances yield all-zero scores.
std::vector<double> small_scale_scores(const std::vector<std::vector<double>>& power_series);

struct LinkScores {
    std::vector<double> s1;
    std::vector<double> s2;
};

// Rotated CSI H' = H .* F with F(m,n) = exp(+j*2pi*f_n*(tof + m*k*sin(aoa)/c)).
// Element magnitudes are preserved exactly.
CMatrix rotate_csi(const CMatrix& frame, double aoa, double tof, const Scene& scene);

struct FeatureMatrix {
    Eigen::MatrixXd phase;     // M x N, radians
    Eigen::MatrixXd magnitude; // M x N, >= 0
};

// H'_ph = sum_q (S1_q + S2_q) * angle(H'_q), H'_am likewise with abs.
// Receivers are summed in index order for reproducibility.
FeatureMatrix build_feature_matrix(std::span<const CMatrix> rotated_frames,
                                   const LinkScores& scores);

} // namespace perception
} // namespace csisim
