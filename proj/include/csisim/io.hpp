#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "csisim/policy.hpp"
#include "csisim/scene.hpp"
#include "csisim/skeleton.hpp"
#include "csisim/spectral.hpp"

namespace csisim {
namespace io {

inline constexpr const char* kVersion = "0.1.0";

// CSI dump: <name>.json metadata next to <name>.bin holding frame-major
// complex64 samples (little-endian float32 re/im pairs, antennas as rows,
// subcarriers as columns).
void write_csi_stream(const std::filesystem::path& dir, const std::string& name,
                      const CsiStream& stream);
CsiStream read_csi_stream(const std::filesystem::path& dir, const std::string& name);

// theta rows, tau columns; first row holds tau in ns, first column theta in
// degrees.
void write_spectrum_csv(const std::filesystem::path& path, const spectral::SpectrumGrid& grid);

// Two blocks, phase then amplitude, antennas as rows.
void write_feature_csv(const std::filesystem::path& path, const perception::FeatureMatrix& fm);

// Same payload in the binary dump layout (float32 little-endian, phase block
// then amplitude block).
void write_feature_bin(const std::filesystem::path& dir, const std::string& name,
                       const perception::FeatureMatrix& fm);

void write_model(const std::filesystem::path& dir, const std::string& name,
                 const skeleton::PredictorModel& model);
skeleton::PredictorModel read_model(const std::filesystem::path& dir, const std::string& name);

struct PolicyCheckpoint {
    policy::DenoiserNet denoiser;
    policy::CriticNet critic;
    policy::BetaSchedule schedule;
    policy::ActionBox box;
    double reward_scale = 1000.0;
};

void write_checkpoint(const std::filesystem::path& dir, const std::string& name,
                      const PolicyCheckpoint& ckpt);
PolicyCheckpoint read_checkpoint(const std::filesystem::path& dir, const std::string& name);

void write_reward_curve(const std::filesystem::path& path, const std::vector<double>& curve);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace io
} // namespace csisim
