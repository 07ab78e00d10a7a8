#include "csisim/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace csisim {
namespace perception {

namespace {

double combined_residual(Vec2 p, std::span<const spectral::Peak> peaks, const Scene& scene,
                         double tof_weight) {
    double total = 0.0;
    for (std::size_t q = 0; q < peaks.size(); ++q) {
        const auto& rx = scene.receivers[q];
        const double predicted_aoa = array_angle(bearing(rx.pos, p), rx.orientation);
        const double d_bearing = peaks[q].theta - predicted_aoa;
        const double path_len = distance(scene.tx_pos, p) + distance(p, rx.pos);
        const double d_ellipse = path_len - peaks[q].tau * kPropagationSpeed;
        total += d_bearing * d_bearing + tof_weight * d_ellipse * d_ellipse;
    }
    return total;
}

struct SearchBox {
    double x_min, x_max, y_min, y_max;
};

SearchBox search_box(const Scene& scene, double margin) {
    SearchBox b{scene.tx_pos.x, scene.tx_pos.x, scene.tx_pos.y, scene.tx_pos.y};
    for (const auto& rx : scene.receivers) {
        b.x_min = std::min(b.x_min, rx.pos.x);
        b.x_max = std::max(b.x_max, rx.pos.x);
        b.y_min = std::min(b.y_min, rx.pos.y);
        b.y_max = std::max(b.y_max, rx.pos.y);
    }
    b.x_min -= margin;
    b.x_max += margin;
    b.y_min -= margin;
    b.y_max += margin;
    return b;
}

UserLocation grid_fit(std::span<const spectral::Peak> peaks, const Scene& scene,
                      const LocalizationConfig& cfg) {
    SearchBox box = search_box(scene, cfg.margin);
    double step = cfg.coarse_step;
    Vec2 best{0.5 * (box.x_min + box.x_max), 0.5 * (box.y_min + box.y_max)};
    double best_res = std::numeric_limits<double>::infinity();

    for (int level = 0; level <= cfg.refine_levels; ++level) {
        for (double x = box.x_min; x <= box.x_max + 1e-12; x += step) {
            for (double y = box.y_min; y <= box.y_max + 1e-12; y += step) {
                const double res = combined_residual({x, y}, peaks, scene, cfg.tof_weight);
                if (res < best_res) {
                    best_res = res;
                    best = {x, y};
                }
            }
        }
        // Zoom on the incumbent for the next level.
        box = {best.x - 2.0 * step, best.x + 2.0 * step, best.y - 2.0 * step, best.y + 2.0 * step};
        step /= 5.0;
    }
    return {best, std::sqrt(best_res)};
}

} // namespace

UserLocation localize_user(std::span<const spectral::Peak> user_peaks, const Scene& scene,
                           const LocalizationConfig& cfg) {
    if (user_peaks.size() < 2)
        throw std::invalid_argument("localize_user: under-determined (need >= 2 receivers)");
    if (user_peaks.size() != scene.receivers.size())
        throw std::invalid_argument("localize_user: one peak per receiver required");

    // All world-frame bearing lines parallel -> no crossing to triangulate.
    bool parallel = true;
    const double b0 = scene.receivers[0].orientation + user_peaks[0].theta;
    for (std::size_t q = 1; q < user_peaks.size(); ++q) {
        const double bq = scene.receivers[q].orientation + user_peaks[q].theta;
        if (std::abs(std::sin(bq - b0)) > 1e-6) {
            parallel = false;
            break;
        }
    }
    if (parallel)
        throw std::invalid_argument("localize_user: under-determined (all bearings parallel)");

    return grid_fit(user_peaks, scene, cfg);
}

UserPathSelection select_user_paths(std::span<const spectral::PathEstimate> estimates,
                                    const Scene& scene, const LocalizationConfig& cfg) {
    if (estimates.size() != scene.receivers.size())
        throw std::invalid_argument("select_user_paths: one estimate per receiver required");
    if (estimates.size() < 2)
        throw std::invalid_argument("select_user_paths: under-determined (need >= 2 receivers)");

    std::vector<std::vector<spectral::Peak>> candidates;
    for (std::size_t q = 0; q < estimates.size(); ++q) {
        const auto& est = estimates[q];
        if (est.peaks.empty())
            throw std::invalid_argument("select_user_paths: receiver with no peaks");

        // The direct path's parameters follow from the known node geometry;
        // peaks matching them are not user candidates.
        const auto& rx = scene.receivers[q];
        const double direct_theta = array_angle(bearing(rx.pos, scene.tx_pos), rx.orientation);
        const double direct_tau = distance(scene.tx_pos, rx.pos) / kPropagationSpeed;
        std::vector<spectral::Peak> keep;
        for (const auto& p : est.peaks) {
            const bool is_direct = std::abs(p.theta - direct_theta) < cfg.direct_theta_window &&
                                   std::abs(p.tau - direct_tau) < cfg.direct_tau_window;
            if (!is_direct) keep.push_back(p);
        }
        if (keep.empty()) keep = est.peaks; // all peaks look direct; fall back
        if (keep.size() > static_cast<std::size_t>(cfg.max_candidates_per_rx))
            keep.resize(static_cast<std::size_t>(cfg.max_candidates_per_rx));
        candidates.push_back(std::move(keep));
    }

    // Coarse-only fit per combination, full refinement for the winner.
    LocalizationConfig coarse = cfg;
    coarse.refine_levels = 0;

    auto near_node = [&scene, &cfg](Vec2 p) {
        if (distance(p, scene.tx_pos) < cfg.min_node_distance) return true;
        for (const auto& rx : scene.receivers)
            if (distance(p, rx.pos) < cfg.min_node_distance) return true;
        return false;
    };

    std::vector<std::size_t> idx(candidates.size(), 0);
    std::vector<spectral::Peak> combo(candidates.size());
    std::vector<spectral::Peak> best_combo;
    double best_res = std::numeric_limits<double>::infinity();
    while (true) {
        for (std::size_t q = 0; q < candidates.size(); ++q) combo[q] = candidates[q][idx[q]];
        double res;
        try {
            const UserLocation fit = localize_user(combo, scene, coarse);
            // A fit that collapses onto a node is the signature of residual
            // multipath consensus, not of the user.
            res = near_node(fit.pos) ? std::numeric_limits<double>::infinity() : fit.residual;
        } catch (const std::invalid_argument&) {
            res = std::numeric_limits<double>::infinity(); // parallel-bearing combo
        }
        if (res < best_res) {
            best_res = res;
            best_combo = combo;
        }
        // Advance the mixed-radix counter.
        std::size_t q = 0;
        while (q < idx.size() && ++idx[q] == candidates[q].size()) {
            idx[q] = 0;
            ++q;
        }
        if (q == idx.size()) break;
    }
    if (best_combo.empty())
        throw std::invalid_argument("select_user_paths: no localizable peak combination");

    UserPathSelection sel;
    sel.peaks = best_combo;
    sel.location = localize_user(sel.peaks, scene, cfg);
    return sel;
}

std::vector<double> large_scale_scores(const UserLocation& user, const Scene& scene) {
    constexpr double kMinDistance = 0.05; // meters, avoids division by zero on-link
    std::vector<double> d;
    d.reserve(scene.receivers.size());
    for (const auto& rx : scene.receivers)
        d.push_back(std::max(kMinDistance, point_line_distance(user.pos, scene.tx_pos, rx.pos)));
    const double d_min = *std::min_element(d.begin(), d.end());
    std::vector<double> s1(d.size());
    for (std::size_t q = 0; q < d.size(); ++q) s1[q] = d_min / d[q];
    return s1;
}

std::vector<double> beam_power_series(const CsiStream& stream, double theta_user,
                                      const Scene& scene) {
    const auto freqs = scene.subcarrier_frequencies();
    const double kappa = scene.spacing() * std::sin(theta_user) / kPropagationSpeed;
    std::vector<double> powers;
    powers.reserve(stream.frames.size());
    for (const auto& frame : stream.frames) {
        cdouble acc = 0.0;
        for (int m = 0; m < frame.rows(); ++m)
            for (int n = 0; n < frame.cols(); ++n)
                acc += std::polar(1.0, 2.0 * M_PI * freqs[static_cast<std::size_t>(n)] * m * kappa) * frame(m, n);
        powers.push_back(std::norm(acc));
    }
    return powers;
}

std::vector<double> small_scale_scores(const std::vector<std::vector<double>>& power_series) {
    std::vector<double> var;
    var.reserve(power_series.size());
    for (const auto& series : power_series) {
        if (series.size() < 2)
            throw std::invalid_argument("small_scale_scores: need >= 2 observations per receiver");
        double mean = 0.0;
        for (double p : series) mean += p;
        mean /= static_cast<double>(series.size());
        double s2 = 0.0;
        for (double p : series) s2 += (p - mean) * (p - mean);
        var.push_back(s2 / static_cast<double>(series.size() - 1));
    }
    const double v_max = *std::max_element(var.begin(), var.end());
    std::vector<double> s2(var.size(), 0.0);
    if (v_max > 0.0)
        for (std::size_t q = 0; q < var.size(); ++q) s2[q] = var[q] / v_max;
    return s2;
}

CMatrix rotate_csi(const CMatrix& frame, double aoa, double tof, const Scene& scene) {
    const auto freqs = scene.subcarrier_frequencies();
    if (frame.cols() != static_cast<Eigen::Index>(freqs.size()))
        throw std::invalid_argument("rotate_csi: frame/scene subcarrier mismatch");
    const double kappa = scene.spacing() * std::sin(aoa) / kPropagationSpeed;
    CMatrix out(frame.rows(), frame.cols());
    for (int m = 0; m < frame.rows(); ++m) {
        const double delay = tof + m * kappa;
        for (int n = 0; n < frame.cols(); ++n)
            out(m, n) = frame(m, n) * std::polar(1.0, 2.0 * M_PI * freqs[static_cast<std::size_t>(n)] * delay);
    }
    return out;
}

FeatureMatrix build_feature_matrix(std::span<const CMatrix> rotated_frames,
                                   const LinkScores& scores) {
    if (rotated_frames.empty())
        throw std::invalid_argument("build_feature_matrix: no frames");
    if (scores.s1.size() != rotated_frames.size() || scores.s2.size() != rotated_frames.size())
        throw std::invalid_argument("build_feature_matrix: scores must cover all receivers");

    const auto rows = rotated_frames.front().rows();
    const auto cols = rotated_frames.front().cols();
    FeatureMatrix fm;
    fm.phase = Eigen::MatrixXd::Zero(rows, cols);
    fm.magnitude = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t q = 0; q < rotated_frames.size(); ++q) {
        const CMatrix& h = rotated_frames[q];
        if (h.rows() != rows || h.cols() != cols)
            throw std::invalid_argument("build_feature_matrix: frame shape mismatch");
        const double w = scores.s1[q] + scores.s2[q];
        for (Eigen::Index m = 0; m < rows; ++m) {
            for (Eigen::Index n = 0; n < cols; ++n) {
                fm.phase(m, n) += w * std::arg(h(m, n));
                fm.magnitude(m, n) += w * std::abs(h(m, n));
            }
        }
    }
    return fm;
}

} // namespace perception
} // namespace csisim
