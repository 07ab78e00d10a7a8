#include <doctest.h>

#include "csisim/channel.hpp"
#include "csisim/rng.hpp"
#include "csisim/spectral.hpp"

using namespace csisim;

namespace {

Scene small_scene(int antennas = 3, int subcarriers = 64) {
    Scene s;
    s.tx_pos = {0.0, 0.0};
    s.user_pos = {3.0, 4.0};
    s.receivers = {{{6.0, 0.0}, M_PI / 2, 0}};
    s.n_antennas = antennas;
    s.n_subcarriers = subcarriers;
    return s;
}

CsiStream synth(const Scene& s, const std::vector<PathSpec>& paths, double noise_var,
                std::uint64_t seed, int frames = 34) {
    channel::SynthesisConfig cfg;
    cfg.noise_var = noise_var;
    cfg.frames = frames;
    return channel::synthesize_csi(s, paths, 0, cfg, seed);
}

spectral::Subspaces decompose_stream(const CsiStream& stream, int wa, int ws,
                                     bool sub_snapshots = true) {
    std::vector<spectral::SmoothedSnapshot> snaps;
    for (const auto& f : stream.frames) snaps.push_back(spectral::spatial_smooth(f, wa, ws));
    const CMatrix r = spectral::correlation_matrix(snaps);
    const int obs = sub_snapshots
                        ? static_cast<int>(stream.frames.size() * snaps.front().x.cols())
                        : static_cast<int>(stream.frames.size());
    return spectral::decompose(r, obs);
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("smoothing window arithmetic") {
    CMatrix frame = CMatrix::Random(4, 4);
    const auto snap = spectral::spatial_smooth(frame, 2, 2);
    CHECK(snap.x.rows() == 4);
    CHECK(snap.x.cols() == 9);

    const auto full = spectral::spatial_smooth(frame, 4, 4);
    CHECK(full.x.rows() == 16);
    CHECK(full.x.cols() == 1);

    CHECK_THROWS_AS((void)spectral::spatial_smooth(frame, 5, 2), std::invalid_argument);
}

TEST_CASE("constant frame smooths to identical all-ones columns") {
    CMatrix frame = CMatrix::Ones(4, 6);
    const auto snap = spectral::spatial_smooth(frame, 2, 3);
    for (Eigen::Index c = 0; c < snap.x.cols(); ++c)
        CHECK((snap.x.col(c) - Eigen::VectorXcd::Ones(6)).norm() == 0.0);
}

TEST_CASE("correlation of a single column is the outer product") {
    spectral::SmoothedSnapshot snap;
    snap.x = CMatrix::Random(5, 1);
    const CMatrix r = spectral::correlation_matrix({{snap}});
    CHECK((r - snap.x * snap.x.adjoint()).norm() < 1e-12);
}

TEST_CASE("orthonormal columns give identity over N'") {
    spectral::SmoothedSnapshot snap;
    snap.x = CMatrix::Identity(4, 4);
    const CMatrix r = spectral::correlation_matrix({{snap}});
    CHECK((r - CMatrix::Identity(4, 4) / 4.0).norm() < 1e-12);
}

TEST_CASE("noise-only correlation approaches sigma^2 I") {
    Scene s = small_scene(3, 32);
    const double sigma2 = 0.5;
    const CsiStream stream = synth(s, {}, sigma2, 99, 1000);
    std::vector<spectral::SmoothedSnapshot> snaps;
    for (const auto& f : stream.frames) snaps.push_back(spectral::spatial_smooth(f, 2, 8));
    const CMatrix r = spectral::correlation_matrix(snaps);
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        CHECK(r(i, i).real() == doctest::Approx(sigma2).epsilon(0.10));
    double max_off = 0.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.cols(); ++j)
            if (i != j) max_off = std::max(max_off, std::abs(r(i, j)));
    CHECK(max_off < 0.10 * sigma2);
}

TEST_CASE("hermitian eigendecomposition basics") {
    const auto id = spectral::eig_hermitian(CMatrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(id.eigenvalues(i) == doctest::Approx(1.0));

    CMatrix d = CMatrix::Zero(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 1.0;
    const auto diag = spectral::eig_hermitian(d);
    CHECK(diag.eigenvalues(0) == doctest::Approx(3.0));
    CHECK(diag.eigenvalues(1) == doctest::Approx(2.0));
    CHECK(diag.eigenvalues(2) == doctest::Approx(1.0));
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(std::abs(diag.eigenvectors(i, i)) - 1.0) < 1e-12);

    Eigen::VectorXcd x(4);
    x << cdouble(1.0, 0.5), cdouble(-0.5, 1.0), cdouble(0.5, -0.5), cdouble(1.0, 0.0);
    x *= 2.0 / x.norm();
    const auto rank1 = spectral::eig_hermitian(x * x.adjoint());
    CHECK(rank1.eigenvalues(0) == doctest::Approx(4.0));
    for (int i = 1; i < 4; ++i) CHECK(std::abs(rank1.eigenvalues(i)) < 1e-12);

    CMatrix bad = CMatrix::Random(3, 3);
    bad(0, 1) = bad(1, 0) + cdouble(1.0, 1.0);
    CHECK_THROWS_AS((void)spectral::eig_hermitian(bad), std::invalid_argument);
}

TEST_CASE("eigenpairs satisfy the residual and orthogonality bounds") {
    Rng rng(5);
    CMatrix a = CMatrix::Random(12, 12);
    CMatrix r = a * a.adjoint();
    const auto eig = spectral::eig_hermitian(r);
    for (int i = 0; i < 12; ++i) {
        const auto v = eig.eigenvectors.col(i);
        CHECK((r * v - eig.eigenvalues(i) * v).norm() <= 1e-8 * r.norm());
    }
    CHECK((eig.eigenvectors.adjoint() * eig.eigenvectors - CMatrix::Identity(12, 12)).norm() < 1e-8);
}

TEST_CASE("mdl counts sources across 100 seeds") {
    Scene s = small_scene();
    const std::vector<PathSpec> one = {{deg_to_rad(20.0), 30e-9, 1.0, PathKind::direct}};
    const std::vector<PathSpec> two = {{deg_to_rad(-20.0), 30e-9, 1.0, PathKind::direct},
                                       {deg_to_rad(20.0), 130e-9, 1.0, PathKind::static_reflection}};

    int ok_one = 0, ok_two = 0, zero_noise = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const double nv1 = channel::noise_var_for_snr(s, {one}, 30.0);
        if (decompose_stream(synth(s, one, nv1, seed), 2, 16).n_sources == 1) ++ok_one;
        const double nv2 = channel::noise_var_for_snr(s, {two}, 20.0);
        if (decompose_stream(synth(s, two, nv2, seed + 1000), 2, 16).n_sources == 2) ++ok_two;
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        if (decompose_stream(synth(s, {}, 1.0, seed + 5000), 2, 16).n_sources == 0) ++zero_noise;

    CHECK(ok_one >= 95);
    CHECK(ok_two >= 90);
    CHECK(zero_noise > 10);
}

TEST_CASE("mdl rejects degenerate inputs") {
    Eigen::VectorXd lam(1);
    lam << 1.0;
    CHECK_THROWS_AS((void)spectral::mdl_order(lam, 10), std::invalid_argument);
    Eigen::VectorXd two(2);
    two << 1.0, 0.5;
    CHECK_THROWS_AS((void)spectral::mdl_order(two, 1), std::invalid_argument);
}

TEST_CASE("noiseless single-path spectrum peaks at the truth") {
    Scene s = small_scene();
    const double theta = deg_to_rad(20.0);
    const double tau = 30e-9;
    const CsiStream stream = synth(s, {{theta, tau, 1.0, PathKind::direct}}, 0.0, 3);
    // Pin L = 1: with zero noise MDL may also pick up the (far weaker)
    // sub-window model mismatch, which is not what this test is about.
    std::vector<spectral::SmoothedSnapshot> snaps;
    for (const auto& f : stream.frames) snaps.push_back(spectral::spatial_smooth(f, 2, 16));
    const auto eig = spectral::eig_hermitian(spectral::correlation_matrix(snaps));
    spectral::Subspaces sub;
    sub.n_sources = 1;
    sub.signal_basis = eig.eigenvectors.leftCols(1);
    sub.noise_basis = eig.eigenvectors.rightCols(eig.eigenvectors.cols() - 1);

    spectral::GridSpec grid;
    grid.tau_max = 100e-9;
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    const auto spec = spectral::music_spectrum(sub, steer, grid);
    Eigen::Index it = 0, jt = 0;
    spec.values.maxCoeff(&it, &jt);
    CHECK(std::abs(spec.theta[static_cast<std::size_t>(it)] - theta) <= grid.theta_step + 1e-12);
    CHECK(std::abs(spec.tau[static_cast<std::size_t>(jt)] - tau) <= grid.tau_step + 1e-12);
}

TEST_CASE("steering vector orthogonal to the noise basis blows the spectrum up") {
    Scene s = small_scene();
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    const int dim = steer.dim();
    Eigen::VectorXcd a(dim);
    steer.steering(deg_to_rad(10.0), 20e-9, a.data());
    a.normalize();
    // Complete a into an orthonormal basis; noise basis = everything but a.
    Eigen::HouseholderQR<CMatrix> qr([&] {
        CMatrix m = CMatrix::Identity(dim, dim);
        m.col(0) = a;
        return m;
    }());
    const CMatrix q = qr.householderQ();
    spectral::Subspaces sub;
    sub.n_sources = 1;
    sub.signal_basis = q.leftCols(1);
    sub.noise_basis = q.rightCols(dim - 1);

    spectral::GridSpec grid;
    grid.theta_min = grid.theta_max = deg_to_rad(10.0);
    grid.tau_min = grid.tau_max = 20e-9;
    const auto ref = spectral::music_spectrum_reference(sub.noise_basis, steer, grid);
    CHECK(1.0 / ref.values(0, 0) <= 1e-10);
    const auto fast = spectral::music_spectrum(sub, steer, grid);
    CHECK(1.0 / fast.values(0, 0) <= 1e-10);
}

TEST_CASE("random subspace keeps the spectrum finite and positive") {
    Scene s = small_scene();
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    const int dim = steer.dim();
    CMatrix m = CMatrix::Random(dim, dim);
    Eigen::HouseholderQR<CMatrix> qr(m);
    const CMatrix q = qr.householderQ();
    spectral::Subspaces sub;
    sub.n_sources = 2;
    sub.signal_basis = q.leftCols(2);
    sub.noise_basis = q.rightCols(dim - 2);
    spectral::GridSpec grid;
    grid.theta_min = grid.theta_max = deg_to_rad(-37.0);
    grid.tau_min = grid.tau_max = 113e-9;
    const auto spec = spectral::music_spectrum(sub, steer, grid);
    CHECK(spec.values(0, 0) > 0.0);
    CHECK(std::isfinite(spec.values(0, 0)));
}

TEST_CASE("empty noise subspace is an error") {
    Scene s = small_scene();
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    spectral::Subspaces sub;
    sub.n_sources = steer.dim();
    sub.signal_basis = CMatrix::Identity(steer.dim(), steer.dim());
    sub.noise_basis = CMatrix::Zero(steer.dim(), 0);
    CHECK_THROWS_AS((void)spectral::music_spectrum(sub, steer, {}), std::invalid_argument);
}

TEST_CASE("peak extraction: spikes, ties, shortfall") {
    spectral::SpectrumGrid spec;
    spec.theta = {0.0, 0.1, 0.2, 0.3};
    spec.tau = {0.0, 1e-9, 2e-9, 3e-9};
    spec.values = Eigen::MatrixXd::Ones(4, 4);
    spec.values(1, 2) = 5.0;
    auto est = spectral::peak_estimates(spec, 1);
    REQUIRE(est.peaks.size() == 1);
    CHECK(est.peaks[0].theta == doctest::Approx(0.1));
    CHECK(est.peaks[0].tau == doctest::Approx(2e-9));
    CHECK(!est.shortfall);

    spec.values = Eigen::MatrixXd::Ones(4, 4);
    spec.values(2, 1) = 7.0;
    spec.values(0, 3) = 7.0; // equal spikes; lexicographic (theta, tau) order
    est = spectral::peak_estimates(spec, 2);
    REQUIRE(est.peaks.size() == 2);
    CHECK(est.peaks[0].theta == doctest::Approx(0.0));
    CHECK(est.peaks[0].tau == doctest::Approx(3e-9));
    CHECK(est.peaks[1].theta == doctest::Approx(0.2));

    est = spectral::peak_estimates(spec, 4);
    CHECK(est.shortfall);
}

TEST_CASE("scaling the correlation matrix changes nothing downstream") {
    Scene s = small_scene();
    const std::vector<PathSpec> paths = {{deg_to_rad(-10.0), 40e-9, 1.0, PathKind::direct},
                                         {deg_to_rad(30.0), 90e-9, 0.8, PathKind::static_reflection}};
    const double nv = channel::noise_var_for_snr(s, {paths}, 20.0);
    const CsiStream stream = synth(s, paths, nv, 17);
    std::vector<spectral::SmoothedSnapshot> snaps;
    for (const auto& f : stream.frames) snaps.push_back(spectral::spatial_smooth(f, 2, 16));
    const CMatrix r = spectral::correlation_matrix(snaps);
    const int obs = static_cast<int>(stream.frames.size() * snaps.front().x.cols());

    const auto eig1 = spectral::eig_hermitian(r);
    const auto eig2 = spectral::eig_hermitian(CMatrix(13.7 * r));
    CHECK(spectral::mdl_order(eig1.eigenvalues, obs) == spectral::mdl_order(eig2.eigenvalues, obs));

    const auto sub1 = spectral::decompose(r, obs);
    const auto sub2 = spectral::decompose(CMatrix(13.7 * r), obs);
    spectral::GridSpec grid;
    grid.tau_max = 150e-9;
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    const auto p1 = spectral::peak_estimates(spectral::music_spectrum(sub1, steer, grid), 2);
    const auto p2 = spectral::peak_estimates(spectral::music_spectrum(sub2, steer, grid), 2);
    REQUIRE(p1.peaks.size() == p2.peaks.size());
    for (std::size_t i = 0; i < p1.peaks.size(); ++i) {
        CHECK(p1.peaks[i].theta == p2.peaks[i].theta);
        CHECK(p1.peaks[i].tau == p2.peaks[i].tau);
    }
}

TEST_CASE("signal and noise subspaces are orthogonal") {
    Scene s = small_scene();
    const std::vector<PathSpec> paths = {{deg_to_rad(12.0), 50e-9, 1.0, PathKind::direct},
                                         {deg_to_rad(-33.0), 110e-9, 0.6, PathKind::static_reflection}};
    const CsiStream stream = synth(s, paths, 0.01, 23);
    const auto sub = decompose_stream(stream, 2, 16);
    REQUIRE(sub.n_sources >= 1);
    CHECK((sub.signal_basis.adjoint() * sub.noise_basis).norm() <= 1e-8);
}

TEST_CASE("noiseless steering vector lies in the signal subspace") {
    // Full-frame window: the smoothed layout equals the synthesis model
    // exactly, so orthogonality to the noise basis is machine precision.
    Scene s = small_scene(3, 16);
    const double theta = deg_to_rad(17.0);
    const double tau = 42e-9;
    const CsiStream stream = synth(s, {{theta, tau, cdouble(0.9, 0.3), PathKind::direct}}, 0.0, 8, 6);
    const auto sub = decompose_stream(stream, 3, 16);
    REQUIRE(sub.n_sources == 1);
    const auto steer = spectral::SteeringSpec::from_scene(s, 3, 16);
    Eigen::VectorXcd a(steer.dim());
    steer.steering(theta, tau, a.data());
    a.normalize();
    CHECK((sub.noise_basis.adjoint() * a).norm() <= 1e-6);
}

TEST_CASE("parallel spectrum is bit-identical to serial and close to the reference") {
    Scene s = small_scene();
    const std::vector<PathSpec> paths = {{deg_to_rad(5.0), 35e-9, 1.0, PathKind::direct}};
    const CsiStream stream = synth(s, paths, 0.05, 31);
    const auto sub = decompose_stream(stream, 2, 16);
    spectral::GridSpec grid;
    grid.theta_step = deg_to_rad(3.0);
    grid.tau_max = 100e-9;
    grid.tau_step = 5e-9;
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);
    const auto serial = spectral::music_spectrum(sub, steer, grid, false);
    const auto parallel = spectral::music_spectrum(sub, steer, grid, true);
    CHECK((serial.values - parallel.values).cwiseAbs().maxCoeff() == 0.0);

    const auto ref = spectral::music_spectrum_reference(sub.noise_basis, steer, grid);
    CHECK(((serial.values - ref.values).cwiseAbs().array() /
           ref.values.cwiseAbs().array().max(1e-30))
              .maxCoeff() < 1e-8);
}

TEST_CASE("music error shrinks on average as snr rises") {
    Scene s = small_scene();
    const double theta = deg_to_rad(20.0);
    const double tau = 30e-9;
    const std::vector<PathSpec> paths = {{theta, tau, 1.0, PathKind::direct}};
    spectral::GridSpec grid;
    grid.tau_max = 100e-9;
    const auto steer = spectral::SteeringSpec::from_scene(s, 2, 16);

    std::vector<double> mean_err;
    for (double snr : {0.0, 10.0, 20.0, 30.0}) {
        const double nv = channel::noise_var_for_snr(s, {paths}, snr);
        double err = 0.0;
        const int seeds = 20;
        for (std::uint64_t seed = 0; seed < seeds; ++seed) {
            const auto sub = decompose_stream(synth(s, paths, nv, 808 + seed), 2, 16);
            if (sub.n_sources == 0) {
                err += 1.0; // count a miss as a large error
                continue;
            }
            const auto spec = spectral::music_spectrum(sub, steer, grid);
            const auto est = spectral::peak_estimates(spec, 1);
            err += std::abs(est.peaks[0].theta - theta) +
                   std::abs(est.peaks[0].tau - tau) * 1e7;
        }
        mean_err.push_back(err / seeds);
    }
    for (std::size_t i = 1; i < mean_err.size(); ++i) CHECK(mean_err[i] <= mean_err[i - 1] + 1e-9);
}

} // TEST_SUITE
