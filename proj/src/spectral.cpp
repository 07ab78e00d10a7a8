#include "csisim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace csisim {
namespace spectral {

SmoothedSnapshot spatial_smooth(const CMatrix& frame, int win_antennas, int win_subcarriers) {
    const int m = static_cast<int>(frame.rows());
    const int n = static_cast<int>(frame.cols());
    if (win_antennas < 2 || win_subcarriers < 2)
        throw std::invalid_argument("spatial_smooth: window dims must be >= 2");
    if (win_antennas > m || win_subcarriers > n)
        throw std::invalid_argument("spatial_smooth: window larger than frame");

    const int n_a = m - win_antennas + 1;
    const int n_s = n - win_subcarriers + 1;
    SmoothedSnapshot snap;
    snap.win_antennas = win_antennas;
    snap.win_subcarriers = win_subcarriers;
    snap.src_antennas = m;
    snap.src_subcarriers = n;
    snap.x.resize(win_antennas * win_subcarriers, n_a * n_s);
    for (int dm = 0; dm < n_a; ++dm) {
        for (int dn = 0; dn < n_s; ++dn) {
            const int col = dm * n_s + dn;
            for (int wm = 0; wm < win_antennas; ++wm)
                for (int wn = 0; wn < win_subcarriers; ++wn)
                    snap.x(wm * win_subcarriers + wn, col) = frame(dm + wm, dn + wn);
        }
    }
    return snap;
}

CMatrix correlation_matrix(std::span<const SmoothedSnapshot> snapshots) {
    if (snapshots.empty()) throw std::invalid_argument("correlation_matrix: no snapshots");
    const auto rows = snapshots.front().x.rows();
    const auto cols = snapshots.front().x.cols();
    CMatrix r = CMatrix::Zero(rows, rows);
    for (const auto& s : snapshots) {
        if (s.x.rows() != rows || s.x.cols() != cols)
            throw std::invalid_argument("correlation_matrix: snapshot dimension mismatch");
        r.selfadjointView<Eigen::Lower>().rankUpdate(s.x);
    }
    r = r.selfadjointView<Eigen::Lower>();
    r /= static_cast<double>(snapshots.size()) * static_cast<double>(cols);
    // Symmetrize away accumulation round-off.
    r = 0.5 * (r + CMatrix(r.adjoint()));
    return r;
}

EigResult eig_hermitian(const CMatrix& r, double hermitian_tol) {
    if (r.rows() != r.cols()) throw std::invalid_argument("eig_hermitian: matrix not square");
    const double scale = r.norm();
    if (scale > 0.0 && (r - r.adjoint()).norm() > hermitian_tol * scale)
        throw std::invalid_argument("eig_hermitian: matrix not Hermitian within tolerance");

    Eigen::SelfAdjointEigenSolver<CMatrix> solver(r);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eig_hermitian: eigensolver failed to converge");

    const auto dim = r.rows();
    EigResult out;
    out.eigenvalues.resize(dim);
    out.eigenvectors.resize(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        out.eigenvalues(i) = solver.eigenvalues()(dim - 1 - i);
        out.eigenvectors.col(i) = solver.eigenvectors().col(dim - 1 - i);
    }
    return out;
}

int mdl_order(const Eigen::VectorXd& lambda, int observations) {
    const int m = static_cast<int>(lambda.size());
    if (m < 2) throw std::invalid_argument("mdl_order: need at least 2 eigenvalues");
    if (observations < 2) throw std::invalid_argument("mdl_order: need at least 2 observations");

    const double floor_val = std::max(lambda(0), 0.0) * 1e-12;
    Eigen::VectorXd lam = lambda.cwiseMax(floor_val > 0.0 ? floor_val : 1e-300);
    const double log_u = std::log(static_cast<double>(observations));

    int best_l = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l <= m - 1; ++l) {
        const int k = m - l;
        double log_gm = 0.0, am = 0.0;
        for (int i = l; i < m; ++i) {
            log_gm += std::log(lam(i));
            am += lam(i);
        }
        log_gm /= k;
        am /= k;
        const double value = -static_cast<double>(k) * observations * (log_gm - std::log(am)) +
                             0.5 * l * (2.0 * m - l) * log_u;
        if (value < best) {
            best = value;
            best_l = l;
        }
    }
    return best_l;
}

Subspaces decompose(const CMatrix& r, int observations) {
    EigResult eig = eig_hermitian(r);
    const int dim = static_cast<int>(r.rows());
    const int l = mdl_order(eig.eigenvalues, observations);
    Subspaces s;
    s.eigenvalues = std::move(eig.eigenvalues);
    s.n_sources = l;
    s.signal_basis = eig.eigenvectors.leftCols(l);
    s.noise_basis = eig.eigenvectors.rightCols(dim - l);
    return s;
}

std::vector<double> GridSpec::theta_values() const {
    std::vector<double> v;
    for (double t = theta_min; t <= theta_max + 1e-12; t += theta_step) v.push_back(t);
    return v;
}

std::vector<double> GridSpec::tau_values() const {
    std::vector<double> v;
    const int n = static_cast<int>(std::floor((tau_max - tau_min) / tau_step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) v.push_back(tau_min + i * tau_step);
    return v;
}

SteeringSpec SteeringSpec::from_scene(const Scene& scene, int win_antennas, int win_subcarriers) {
    SteeringSpec s;
    const auto freqs = scene.subcarrier_frequencies();
    if (win_subcarriers > static_cast<int>(freqs.size()))
        throw std::invalid_argument("steering: window wider than subcarrier count");
    s.window_freqs.assign(freqs.begin(), freqs.begin() + win_subcarriers);
    s.antenna_spacing = scene.spacing();
    s.win_antennas = win_antennas;
    return s;
}

void SteeringSpec::steering(double theta, double tau, cdouble* out) const {
    const int ws = static_cast<int>(window_freqs.size());
    const double kappa = antenna_spacing * std::sin(theta) / kPropagationSpeed;
    for (int m = 0; m < win_antennas; ++m) {
        const double delay = tau + m * kappa;
        for (int n = 0; n < ws; ++n)
            out[m * ws + n] = std::polar(1.0, -2.0 * M_PI * window_freqs[static_cast<std::size_t>(n)] * delay);
    }
}

namespace {

// Per-axis phase factors: a = antenna_factor(theta) .* tile(tau_factor(tau)).
struct SteeringTables {
    std::vector<Eigen::VectorXcd> antenna; // per theta, length M'
    std::vector<Eigen::VectorXcd> tau;     // per tau, length w_s
};

SteeringTables build_tables(const SteeringSpec& steer, const std::vector<double>& thetas,
                            const std::vector<double>& taus) {
    const int ws = static_cast<int>(steer.window_freqs.size());
    const int dim = steer.dim();
    SteeringTables t;
    t.antenna.reserve(thetas.size());
    for (double th : thetas) {
        Eigen::VectorXcd v(dim);
        const double kappa = steer.antenna_spacing * std::sin(th) / kPropagationSpeed;
        for (int m = 0; m < steer.win_antennas; ++m)
            for (int n = 0; n < ws; ++n)
                v(m * ws + n) = std::polar(1.0, -2.0 * M_PI * steer.window_freqs[static_cast<std::size_t>(n)] * m * kappa);
        t.antenna.push_back(std::move(v));
    }
    t.tau.reserve(taus.size());
    for (double ta : taus) {
        Eigen::VectorXcd v(ws);
        for (int n = 0; n < ws; ++n)
            v(n) = std::polar(1.0, -2.0 * M_PI * steer.window_freqs[static_cast<std::size_t>(n)] * ta);
        t.tau.push_back(std::move(v));
    }
    return t;
}

} // namespace

SpectrumGrid music_spectrum(const Subspaces& sub, const SteeringSpec& steer,
                            const GridSpec& grid, bool parallel) {
    const int dim = steer.dim();
    if (sub.noise_basis.cols() == 0)
        throw std::invalid_argument("music_spectrum: empty noise subspace (L = M')");
    if (sub.signal_basis.rows() != dim)
        throw std::invalid_argument("music_spectrum: subspace/steering dimension mismatch");

    SpectrumGrid out;
    out.theta = grid.theta_values();
    out.tau = grid.tau_values();
    if (out.theta.empty() || out.tau.empty())
        throw std::invalid_argument("music_spectrum: empty grid");
    out.values.resize(static_cast<Eigen::Index>(out.theta.size()),
                      static_cast<Eigen::Index>(out.tau.size()));

    const SteeringTables tables = build_tables(steer, out.theta, out.tau);
    const int ws = static_cast<int>(steer.window_freqs.size());
    const int wa = steer.win_antennas;
    const int l = sub.n_sources;
    const CMatrix& es = sub.signal_basis;
    const auto n_theta = static_cast<std::ptrdiff_t>(out.theta.size());

    // |E_N^H a|^2 = M' - |E_S^H a|^2 since [E_S E_N] is unitary.
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t it = 0; it < n_theta; ++it) {
        const Eigen::VectorXcd& ant = tables.antenna[static_cast<std::size_t>(it)];
        Eigen::VectorXcd a(dim);
        for (std::size_t jt = 0; jt < out.tau.size(); ++jt) {
            const Eigen::VectorXcd& tf = tables.tau[jt];
            for (int m = 0; m < wa; ++m)
                for (int n = 0; n < ws; ++n)
                    a(m * ws + n) = ant(m * ws + n) * tf(n);
            double sig = 0.0;
            for (int c = 0; c < l; ++c) {
                cdouble acc = 0.0;
                const cdouble* col = es.col(c).data();
                for (int i = 0; i < dim; ++i) acc += std::conj(col[i]) * a(i);
                sig += std::norm(acc);
            }
            double denom = static_cast<double>(dim) - sig;
            // Guard exact-orthogonality round-off; keeps the spectrum positive.
            if (denom < 1e-300) denom = 1e-300;
            out.values(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(jt)) = 1.0 / denom;
        }
    }
    return out;
}

SpectrumGrid music_spectrum_reference(const CMatrix& noise_basis, const SteeringSpec& steer,
                                      const GridSpec& grid) {
    const int dim = steer.dim();
    if (noise_basis.cols() == 0)
        throw std::invalid_argument("music_spectrum: empty noise subspace (L = M')");
    if (noise_basis.rows() != dim)
        throw std::invalid_argument("music_spectrum: subspace/steering dimension mismatch");

    SpectrumGrid out;
    out.theta = grid.theta_values();
    out.tau = grid.tau_values();
    out.values.resize(static_cast<Eigen::Index>(out.theta.size()),
                      static_cast<Eigen::Index>(out.tau.size()));
    Eigen::VectorXcd a(dim);
    for (std::size_t it = 0; it < out.theta.size(); ++it) {
        for (std::size_t jt = 0; jt < out.tau.size(); ++jt) {
            steer.steering(out.theta[it], out.tau[jt], a.data());
            const Eigen::VectorXcd proj = noise_basis.adjoint() * a;
            double denom = proj.squaredNorm();
            if (denom < 1e-300) denom = 1e-300;
            out.values(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(jt)) = 1.0 / denom;
        }
    }
    return out;
}

PathEstimate peak_estimates(const SpectrumGrid& spectrum, int count) {
    if (count < 1) throw std::invalid_argument("peak_estimates: count must be >= 1");
    const auto rows = spectrum.values.rows();
    const auto cols = spectrum.values.cols();

    std::vector<Peak> maxima;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = spectrum.values(i, j);
            bool is_max = true;
            for (Eigen::Index di = -1; di <= 1 && is_max; ++di) {
                for (Eigen::Index dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const Eigen::Index ni = i + di, nj = j + dj;
                    if (ni < 0 || nj < 0 || ni >= rows || nj >= cols) continue;
                    const double w = spectrum.values(ni, nj);
                    // Strictly-greater neighbor kills the peak; an equal
                    // neighbor earlier in scan order claims the plateau.
                    if (w > v || (w == v && (ni < i || (ni == i && nj < j)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max)
                maxima.push_back({spectrum.theta[static_cast<std::size_t>(i)],
                                  spectrum.tau[static_cast<std::size_t>(j)], v});
        }
    }

    std::sort(maxima.begin(), maxima.end(), [](const Peak& a, const Peak& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.theta != b.theta) return a.theta < b.theta;
        return a.tau < b.tau;
    });

    PathEstimate est;
    est.shortfall = static_cast<int>(maxima.size()) < count;
    const auto take = std::min<std::size_t>(maxima.size(), static_cast<std::size_t>(count));
    est.peaks.assign(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(take));
    return est;
}

int default_win_antennas(int m) { return std::max(2, m / 2 + (m % 2)); }
int default_win_subcarriers(int n) { return std::min(16, n); }

ReceiverEstimate estimate_paths(const CsiStream& stream, const Scene& scene,
                                const EstimationConfig& cfg, bool parallel) {
    if (stream.frames.empty()) throw std::invalid_argument("estimate_paths: empty stream");
    const int m = static_cast<int>(stream.frames.front().rows());
    const int n = static_cast<int>(stream.frames.front().cols());
    const int wa = cfg.win_antennas > 0 ? cfg.win_antennas : default_win_antennas(m);
    const int ws = cfg.win_subcarriers > 0 ? cfg.win_subcarriers : default_win_subcarriers(n);

    std::vector<SmoothedSnapshot> snaps;
    snaps.reserve(stream.frames.size());
    for (const auto& f : stream.frames) snaps.push_back(spatial_smooth(f, wa, ws));

    const CMatrix r = correlation_matrix(snaps);
    const int n_windows = static_cast<int>(snaps.front().x.cols());
    const int observations = cfg.count_sub_snapshots
                                 ? static_cast<int>(stream.frames.size()) * n_windows
                                 : static_cast<int>(stream.frames.size());

    ReceiverEstimate out;
    out.subspaces = decompose(r, observations);
    if (out.subspaces.n_sources == 0) {
        out.estimate.grid = cfg.grid;
        out.estimate.shortfall = true;
        return out;
    }
    const SteeringSpec steer = SteeringSpec::from_scene(scene, wa, ws);
    out.spectrum = music_spectrum(out.subspaces, steer, cfg.grid, parallel);
    out.estimate = peak_estimates(out.spectrum, out.subspaces.n_sources);
    out.estimate.grid = cfg.grid;
    return out;
}

} // namespace spectral
} // namespace csisim
