#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "csisim/geometry.hpp"

namespace csisim {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

struct ReceiverSpec {
    Vec2 pos;
    double orientation = 0.0; // broadside direction of the linear array, radians
    int id = 0;
};

// Geometry and radio parameters of one perception deployment.
struct Scene {
    Vec2 tx_pos;
    std::vector<ReceiverSpec> receivers;
    Vec2 user_pos;
    double f_center = 5.805e9;       // Hz
    double bandwidth = 80.0e6;       // Hz
    int n_subcarriers = 256;         // N
    int n_antennas = 3;              // M
    double antenna_spacing = 0.0;    // meters; 0 means half-wavelength
    double packet_rate = 400.0;      // frames per second

    // Throws std::invalid_argument on violated invariants.
    void validate() const;

    double spacing() const {
        return antenna_spacing > 0.0 ? antenna_spacing : kPropagationSpeed / (2.0 * f_center);
    }

    // N frequencies spanning [f_center - bw/2, f_center + bw/2] uniformly.
    std::vector<double> subcarrier_frequencies() const;

    const ReceiverSpec& receiver(int id) const;
};

enum class PathKind { direct, user_reflection, static_reflection };

struct PathSpec {
    double aoa = 0.0;        // radians, relative to array broadside, |aoa| <= pi/2
    double tof = 0.0;        // seconds
    cdouble attenuation = 1.0;
    PathKind kind = PathKind::direct;
};

// U complex M x N frames captured by one receiver.
struct CsiStream {
    std::vector<CMatrix> frames;
    std::vector<double> timestamps;   // seconds
    int receiver_id = 0;
    std::vector<double> phase_error;  // per-frame epsilon, radians
    double noise_var = 0.0;
};

} // namespace csisim
