#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csisim/policy.hpp"
#include "csisim/pricing.hpp"
#include "csisim/scene.hpp"
#include "csisim/spectral.hpp"

namespace csisim {

struct ChannelBlock {
    int frames = 34;
    std::optional<double> snr_db;       // exclusive with noise_var
    std::optional<double> noise_var;
    bool phase_error = true;
    double path_gain = 1.0;
    bool random_initial_phase = true;
};

struct EstimationBlock {
    spectral::EstimationConfig config;
    double loc_margin = 3.0;
    double loc_coarse_step = 0.25;
    int loc_refine_levels = 3;
    double loc_tof_weight = 1.0;
    int loc_max_candidates = 3;
    bool use_true_rotation = false; // debug: rotate with ground-truth parameters
};

struct EconomyBlock {
    pricing::EnvState env;
    pricing::PricingGrid grid;
    std::vector<int> sweep_max_aps; // optional Fig.-14-style AP sweep
};

struct TrainingBlock {
    policy::TrainConfig config;
    policy::EnvDistribution distribution;
    int eval_draws = 50;
};

struct OutputBlock {
    bool write_csi = true;
    bool write_spectrum_csv = true;
    bool write_feature_csv = true;
};

struct SkeletonBlock {
    int grid_x = 5; // user sweep positions for baseline fitting
    int grid_y = 4;
    double ridge_lambda = 1e-6;
};

struct Scenario {
    std::string name;
    Scene scene;
    ChannelBlock channel;
    EstimationBlock estimation;
    SkeletonBlock skeleton;
    std::optional<EconomyBlock> economy;
    std::optional<TrainingBlock> training;
    OutputBlock output;
};

// Parses and validates a scenario file. Unknown keys and type mismatches
// raise ScenarioError with the offending JSON path.
class ScenarioError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {});

// Parses an already-loaded document (used by tests and by --set overrides).
Scenario parse_scenario(const nlohmann::json& doc);

// Applies a dotted-path override "a.b.c=value" onto a JSON document.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Effective noise variance of a scenario (resolves snr_db if given).
double scenario_noise_var(const Scenario& sc, const std::vector<std::vector<PathSpec>>& paths);

} // namespace csisim
