#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csisim/runner.hpp"

namespace {

struct CommonOptions {
    std::string scenario_path;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::string model_dir;
    std::string checkpoint_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--scenario", opt.scenario_path, "Scenario file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opt.seed, "Master seed");
    cmd->add_option("--out-dir", opt.out_dir,
                    "Output directory (default: $CSISIM_OUT_DIR or ./csisim_out)");
    cmd->add_option("--set", opt.overrides,
                    "Scenario override, dotted path (e.g. --set channel.snr_db=10)");
}

int execute(const std::string& name, const CommonOptions& opt) {
    csisim::runner::RunContext ctx;
    ctx.scenario = csisim::load_scenario(opt.scenario_path, opt.overrides);
    ctx.scenario_path = opt.scenario_path;
    ctx.seed = opt.seed;
    std::string base = opt.out_dir;
    if (base.empty()) {
        const char* env = std::getenv("CSISIM_OUT_DIR");
        base = env != nullptr ? env : "csisim_out";
        base += "/" + ctx.scenario.name + "-" + name;
    }
    ctx.out_dir = base;
    ctx.model_dir = opt.model_dir;
    ctx.checkpoint_dir = opt.checkpoint_dir;
    csisim::runner::run(name, ctx);
    std::cout << "report: " << (ctx.out_dir / "report.json").string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale wireless perception and service pricing simulator"};
    app.require_subcommand(1);

    const std::vector<std::string> subcommands = {
        "simulate-csi", "estimate",         "smsp",        "skeleton-fit", "skeleton-predict",
        "incentive-oracle", "train-policy", "eval-policy", "pipeline"};

    std::map<std::string, CommonOptions> options;
    for (const auto& name : subcommands) {
        auto* cmd = app.add_subcommand(name);
        add_common(cmd, options[name]);
        if (name == "skeleton-predict")
            cmd->add_option("--model-dir", options[name].model_dir,
                            "Directory holding model.json/model.bin (default: out dir)");
        if (name == "eval-policy")
            cmd->add_option("--checkpoint-dir", options[name].checkpoint_dir,
                            "Directory holding checkpoint.json/.bin (default: out dir)");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return execute(name, options[name]);
    } catch (const csisim::ScenarioError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "validation"}}.dump() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "validation"}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
        return 1;
    }
}
