#include <doctest.h>

#include "csisim/channel.hpp"

using namespace csisim;

namespace {

Scene two_node_scene(Vec2 tx, Vec2 rx, Vec2 user, double orientation = 0.0) {
    Scene s;
    s.tx_pos = tx;
    s.user_pos = user;
    s.receivers = {{rx, orientation, 0}};
    s.n_subcarriers = 16; // small frames keep the unit tests fast
    return s;
}

channel::PathModelConfig fixed_phase() {
    channel::PathModelConfig cfg;
    cfg.random_initial_phase = false;
    return cfg;
}

} // namespace

TEST_SUITE("channel") {

TEST_CASE("user on broadside at equal distance gives zero AoA") {
    // Receiver at origin looking along +x; user straight ahead.
    Scene s = two_node_scene({0.0, -3.0}, {0.0, 0.0}, {4.0, 0.0});
    const auto paths = channel::ground_truth_paths(s, fixed_phase(), 1);
    REQUIRE(paths.size() == 1);
    const auto& user = paths[0][1];
    CHECK(user.kind == PathKind::user_reflection);
    CHECK(user.aoa == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("user path ToF is the two-leg distance over c") {
    Scene s = two_node_scene({0.0, 0.0}, {6.0, 0.0}, {3.0, 4.0});
    const auto paths = channel::ground_truth_paths(s, fixed_phase(), 1);
    // d(tx,user) = 5, d(user,rx) = 5.
    CHECK(paths[0][1].tof == doctest::Approx(10.0 / kPropagationSpeed).epsilon(1e-12));
}

TEST_CASE("direct path ToF is the straight-line distance over c") {
    Scene s = two_node_scene({0.0, 0.0}, {10.0, 0.0}, {3.0, 4.0});
    const auto paths = channel::ground_truth_paths(s, fixed_phase(), 1);
    CHECK(paths[0][0].kind == PathKind::direct);
    CHECK(paths[0][0].tof == doctest::Approx(10.0 / kPropagationSpeed).epsilon(1e-12));
}

TEST_CASE("exactly one user reflection per receiver, attenuation decays with distance") {
    Scene s = two_node_scene({0.0, 0.0}, {6.0, 0.0}, {3.0, 4.0});
    s.receivers.push_back({{0.0, 6.0}, -M_PI / 2, 1});
    const auto paths = channel::ground_truth_paths(s, {}, 5);
    for (const auto& rx_paths : paths) {
        int users = 0;
        for (const auto& p : rx_paths)
            if (p.kind == PathKind::user_reflection) ++users;
        CHECK(users == 1);
        CHECK(std::abs(rx_paths[1].attenuation) < std::abs(rx_paths[0].attenuation));
    }
}

TEST_CASE("user collocated with a receiver is a degenerate geometry error") {
    Scene s = two_node_scene({0.0, 0.0}, {6.0, 0.0}, {6.0, 0.0});
    CHECK_THROWS_AS((void)channel::ground_truth_paths(s, {}, 1), std::invalid_argument);
}

TEST_CASE("single zero-delay broadside path gives all-ones CSI") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    const PathSpec path{0.0, 0.0, 1.0, PathKind::direct};
    channel::SynthesisConfig cfg;
    cfg.phase_error = false;
    cfg.frames = 2;
    const auto stream = channel::synthesize_csi(s, {{path}}, 0, cfg, 3);
    for (const auto& frame : stream.frames)
        for (int m = 0; m < frame.rows(); ++m)
            for (int n = 0; n < frame.cols(); ++n) {
                CHECK(frame(m, n).real() == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(frame(m, n).imag() == doctest::Approx(0.0).epsilon(1e-12));
            }
}

TEST_CASE("antenna ratio follows the steering phase at 30 degrees") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    const PathSpec path{deg_to_rad(30.0), 0.0, 1.0, PathKind::direct};
    channel::SynthesisConfig cfg;
    cfg.phase_error = false;
    cfg.frames = 1;
    const auto stream = channel::synthesize_csi(s, {{path}}, 0, cfg, 3);
    const auto freqs = s.subcarrier_frequencies();
    const auto& h = stream.frames[0];
    for (int n = 0; n < s.n_subcarriers; ++n) {
        const cdouble expected =
            std::polar(1.0, -2.0 * M_PI * freqs[static_cast<std::size_t>(n)] * s.spacing() * 0.5 /
                                kPropagationSpeed);
        const cdouble ratio = h(1, n) / h(0, n);
        CHECK(std::abs(ratio - expected) < 1e-12);
    }
}

TEST_CASE("mirrored equal paths add coherently on the reference antenna") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    const double alpha = 0.7;
    const std::vector<PathSpec> paths = {{deg_to_rad(25.0), 40e-9, alpha, PathKind::direct},
                                         {deg_to_rad(-25.0), 40e-9, alpha, PathKind::static_reflection}};
    channel::SynthesisConfig cfg;
    cfg.phase_error = false;
    cfg.frames = 1;
    const auto stream = channel::synthesize_csi(s, paths, 0, cfg, 3);
    for (int n = 0; n < s.n_subcarriers; ++n)
        CHECK(std::abs(stream.frames[0](0, n)) == doctest::Approx(2.0 * alpha).epsilon(1e-9));
}

TEST_CASE("CSI is linear in the path set") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    const std::vector<PathSpec> paths = {{deg_to_rad(10.0), 20e-9, cdouble(0.5, 0.25), PathKind::direct},
                                         {deg_to_rad(-35.0), 55e-9, cdouble(0.1, -0.3), PathKind::static_reflection}};
    const CMatrix sum = channel::noiseless_frame(s, paths);
    const CMatrix a = channel::noiseless_frame(s, {{paths[0]}});
    const CMatrix b = channel::noiseless_frame(s, {{paths[1]}});
    CHECK((sum - a - b).norm() < 1e-12);
}

TEST_CASE("magnitudes are invariant to the frame phase error") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    const PathSpec path{deg_to_rad(15.0), 30e-9, cdouble(0.8, 0.1), PathKind::direct};
    channel::SynthesisConfig with_eps;
    with_eps.frames = 4;
    channel::SynthesisConfig no_eps = with_eps;
    no_eps.phase_error = false;
    const auto noisy = channel::synthesize_csi(s, {{path}}, 0, with_eps, 11);
    const auto clean = channel::synthesize_csi(s, {{path}}, 0, no_eps, 11);
    for (std::size_t u = 0; u < noisy.frames.size(); ++u) {
        CHECK(noisy.phase_error[u] != 0.0);
        CHECK((noisy.frames[u].cwiseAbs() - clean.frames[u].cwiseAbs()).norm() < 1e-9);
    }
}

TEST_CASE("empirical noise power converges to noise_var") {
    Scene s = two_node_scene({0.0, 0.0}, {5.0, 0.0}, {1.0, 1.0});
    s.n_subcarriers = 64;
    s.n_antennas = 4;
    const PathSpec path{deg_to_rad(5.0), 25e-9, 1.0, PathKind::direct};
    channel::SynthesisConfig cfg;
    cfg.noise_var = 0.37;
    cfg.phase_error = false;
    cfg.frames = 64; // 64*4*64 = 16384 >= 1e4 samples
    const auto stream = channel::synthesize_csi(s, {{path}}, 0, cfg, 2024);
    const CMatrix base = channel::noiseless_frame(s, {{path}});
    double power = 0.0;
    std::size_t count = 0;
    for (const auto& f : stream.frames) {
        power += (f - base).squaredNorm();
        count += static_cast<std::size_t>(f.size());
    }
    power /= static_cast<double>(count);
    CHECK(power == doctest::Approx(cfg.noise_var).epsilon(0.05));
}

TEST_CASE("same seed gives a bit-identical stream") {
    Scene s = two_node_scene({0.0, 0.0}, {6.0, 0.0}, {3.0, 4.0});
    const auto paths = channel::ground_truth_paths(s, {}, 9);
    channel::SynthesisConfig cfg;
    cfg.noise_var = 0.1;
    cfg.frames = 8;
    const auto a = channel::synthesize_all(s, paths, cfg, 77);
    const auto b = channel::synthesize_all(s, paths, cfg, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t q = 0; q < a.size(); ++q) {
        REQUIRE(a[q].frames.size() == b[q].frames.size());
        for (std::size_t u = 0; u < a[q].frames.size(); ++u)
            CHECK(a[q].frames[u] == b[q].frames[u]);
        CHECK(a[q].phase_error == b[q].phase_error);
    }
}

TEST_CASE("snr helper hits the requested ratio") {
    Scene s = two_node_scene({0.0, 0.0}, {6.0, 0.0}, {3.0, 4.0});
    const auto paths = channel::ground_truth_paths(s, fixed_phase(), 1);
    const double nv = channel::noise_var_for_snr(s, paths, 20.0);
    double power = 0.0;
    for (const auto& p : paths) power += channel::noiseless_frame(s, p).squaredNorm();
    power /= static_cast<double>(paths.size() * s.n_antennas * s.n_subcarriers);
    CHECK(power / nv == doctest::Approx(100.0).epsilon(1e-9));
}

} // TEST_SUITE
