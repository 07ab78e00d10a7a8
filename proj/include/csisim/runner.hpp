#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "csisim/scenario.hpp"

namespace csisim {
namespace runner {

struct RunContext {
    Scenario scenario;
    std::string scenario_path;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;
    std::filesystem::path model_dir;      // skeleton-predict input
    std::filesystem::path checkpoint_dir; // eval-policy input
};

// Stage implementations; each returns its report fragment and writes its
// artifacts under ctx.out_dir.
nlohmann::json run_simulate(const RunContext& ctx);
nlohmann::json run_estimate(const RunContext& ctx);
nlohmann::json run_smsp(const RunContext& ctx);
nlohmann::json run_skeleton_fit(const RunContext& ctx);
nlohmann::json run_skeleton_predict(const RunContext& ctx);
nlohmann::json run_incentive_oracle(const RunContext& ctx);
nlohmann::json run_train_policy(const RunContext& ctx);
nlohmann::json run_eval_policy(const RunContext& ctx);
nlohmann::json run_pipeline(const RunContext& ctx);

// Dispatches a subcommand, assembles the full report (metrics plus seed,
// version and wall time; the volatile timestamp/wall-time pair is isolated
// in the "timing" field) and writes out_dir/report.json.
nlohmann::json run(const std::string& subcommand, const RunContext& ctx);

} // namespace runner
} // namespace csisim
