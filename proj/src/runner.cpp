#include "csisim/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "csisim/channel.hpp"
#include "csisim/io.hpp"
#include "csisim/perception.hpp"
#include "csisim/skeleton.hpp"

namespace csisim {
namespace runner {

namespace {

using nlohmann::json;

constexpr std::uint64_t kPathSeed = 11;
constexpr std::uint64_t kCsiSeed = 12;
constexpr std::uint64_t kFitSeed = 13;
constexpr std::uint64_t kTrainSeed = 14;
constexpr std::uint64_t kEvalSeed = 15;
constexpr std::uint64_t kPolicySeed = 16;

perception::LocalizationConfig loc_config(const Scenario& sc) {
    perception::LocalizationConfig cfg;
    cfg.margin = sc.estimation.loc_margin;
    cfg.coarse_step = sc.estimation.loc_coarse_step;
    cfg.refine_levels = sc.estimation.loc_refine_levels;
    cfg.tof_weight = sc.estimation.loc_tof_weight;
    cfg.max_candidates_per_rx = sc.estimation.loc_max_candidates;
    return cfg;
}

// Everything downstream of the channel in one bundle so stages can share it.
struct PerceptionState {
    std::vector<std::vector<PathSpec>> paths;
    double noise_var = 0.0;
    std::vector<CsiStream> streams;
    std::vector<spectral::ReceiverEstimate> estimates;
    perception::UserPathSelection selection;
    perception::LinkScores scores;
    std::vector<spectral::Peak> rotation; // per receiver, as used for Eq. 12-14
    std::vector<perception::FeatureMatrix> features; // one per frame
};

void synthesize(const RunContext& ctx, PerceptionState& st) {
    const auto& sc = ctx.scenario;
    channel::PathModelConfig pm;
    pm.gain = sc.channel.path_gain;
    pm.random_initial_phase = sc.channel.random_initial_phase;
    Rng master(ctx.seed);
    st.paths = channel::ground_truth_paths(sc.scene, pm, master.child(kPathSeed).next_u64());
    st.noise_var = scenario_noise_var(sc, st.paths);
    channel::SynthesisConfig syn;
    syn.noise_var = st.noise_var;
    syn.phase_error = sc.channel.phase_error;
    syn.frames = sc.channel.frames;
    st.streams = channel::synthesize_all(sc.scene, st.paths, syn, master.child(kCsiSeed).next_u64());
}

void estimate(const RunContext& ctx, PerceptionState& st) {
    const auto& sc = ctx.scenario;
    st.estimates.resize(st.streams.size());
    for (std::size_t q = 0; q < st.streams.size(); ++q)
        st.estimates[q] = spectral::estimate_paths(st.streams[q], sc.scene, sc.estimation.config);
}

void perceive(const RunContext& ctx, PerceptionState& st) {
    const auto& sc = ctx.scenario;
    std::vector<spectral::PathEstimate> ests;
    ests.reserve(st.estimates.size());
    for (const auto& e : st.estimates) ests.push_back(e.estimate);
    st.selection = perception::select_user_paths(ests, sc.scene, loc_config(sc));

    st.scores.s1 = perception::large_scale_scores(st.selection.location, sc.scene);
    std::vector<std::vector<double>> powers;
    for (std::size_t q = 0; q < st.streams.size(); ++q) {
        const auto& rx = sc.scene.receivers[q];
        const double theta_user =
            array_angle(bearing(rx.pos, st.selection.location.pos), rx.orientation);
        powers.push_back(perception::beam_power_series(st.streams[q], theta_user, sc.scene));
    }
    st.scores.s2 = perception::small_scale_scores(powers);

    st.rotation.clear();
    for (std::size_t q = 0; q < st.streams.size(); ++q) {
        if (sc.estimation.use_true_rotation) {
            for (const auto& p : st.paths[q])
                if (p.kind == PathKind::user_reflection)
                    st.rotation.push_back({p.aoa, p.tof, 0.0});
        } else {
            st.rotation.push_back(st.selection.peaks[q]);
        }
    }

    const auto frames = st.streams.front().frames.size();
    st.features.clear();
    st.features.reserve(frames);
    for (std::size_t u = 0; u < frames; ++u) {
        std::vector<CMatrix> rotated;
        rotated.reserve(st.streams.size());
        for (std::size_t q = 0; q < st.streams.size(); ++q)
            rotated.push_back(perception::rotate_csi(st.streams[q].frames[u], st.rotation[q].theta,
                                                     st.rotation[q].tau, sc.scene));
        st.features.push_back(perception::build_feature_matrix(rotated, st.scores));
    }
}

json path_json(const PathSpec& p) {
    const char* kind = p.kind == PathKind::direct
                           ? "direct"
                           : (p.kind == PathKind::user_reflection ? "user_reflection"
                                                                  : "static_reflection");
    return {{"aoa_deg", rad_to_deg(p.aoa)},
            {"tof_ns", p.tof * 1e9},
            {"attenuation_abs", std::abs(p.attenuation)},
            {"kind", kind}};
}

json simulate_report(const RunContext& ctx, const PerceptionState& st, bool write_artifacts) {
    const auto& sc = ctx.scenario;
    json stage;
    stage["noise_var_pow"] = st.noise_var;
    stage["frames_count"] = sc.channel.frames;
    json receivers = json::array();
    for (std::size_t q = 0; q < st.streams.size(); ++q) {
        json r;
        r["receiver_id"] = st.streams[q].receiver_id;
        json paths = json::array();
        for (const auto& p : st.paths[q]) paths.push_back(path_json(p));
        r["paths"] = paths;
        double power = 0.0;
        for (const auto& f : st.streams[q].frames) power += f.squaredNorm();
        power /= static_cast<double>(st.streams[q].frames.size() * sc.scene.n_antennas *
                                     sc.scene.n_subcarriers);
        r["mean_entry_power_pow"] = power;
        receivers.push_back(r);
        if (write_artifacts && sc.output.write_csi)
            io::write_csi_stream(ctx.out_dir, "csi_rx" + std::to_string(st.streams[q].receiver_id),
                                 st.streams[q]);
    }
    stage["receivers"] = receivers;
    return stage;
}

json estimate_report(const RunContext& ctx, const PerceptionState& st, bool write_artifacts) {
    json stage;
    json receivers = json::array();
    for (std::size_t q = 0; q < st.estimates.size(); ++q) {
        const auto& est = st.estimates[q];
        json r;
        r["receiver_id"] = ctx.scenario.scene.receivers[q].id;
        r["sources_count"] = est.subspaces.n_sources;
        r["shortfall"] = est.estimate.shortfall;
        json peaks = json::array();
        for (const auto& p : est.estimate.peaks)
            peaks.push_back({{"aoa_deg", rad_to_deg(p.theta)},
                             {"tof_ns", p.tau * 1e9},
                             {"spectrum_value", p.value}});
        r["peaks"] = peaks;
        receivers.push_back(r);
        if (write_artifacts && ctx.scenario.output.write_spectrum_csv &&
            est.spectrum.values.size() > 0)
            io::write_spectrum_csv(ctx.out_dir / ("spectrum_rx" +
                                                  std::to_string(ctx.scenario.scene.receivers[q].id) +
                                                  ".csv"),
                                   est.spectrum);
    }
    stage["receivers"] = receivers;
    return stage;
}

json smsp_report(const RunContext& ctx, const PerceptionState& st, bool write_artifacts) {
    const auto& sc = ctx.scenario;
    json stage;
    stage["user_estimate"] = {{"x_m", st.selection.location.pos.x},
                              {"y_m", st.selection.location.pos.y},
                              {"residual_m", st.selection.location.residual}};
    stage["user_true"] = {{"x_m", sc.scene.user_pos.x}, {"y_m", sc.scene.user_pos.y}};
    stage["localization_error_m"] = distance(st.selection.location.pos, sc.scene.user_pos);
    stage["s1_scores"] = st.scores.s1;
    stage["s2_scores"] = st.scores.s2;
    json rot = json::array();
    for (const auto& p : st.rotation)
        rot.push_back({{"aoa_deg", rad_to_deg(p.theta)}, {"tof_ns", p.tau * 1e9}});
    stage["rotation_params"] = rot;
    const auto& fm = st.features.front();
    stage["feature_frame0"] = {{"mean_amplitude", fm.magnitude.mean()},
                               {"max_amplitude", fm.magnitude.maxCoeff()},
                               {"mean_phase_rad", fm.phase.mean()}};
    if (write_artifacts && sc.output.write_feature_csv) {
        io::write_feature_csv(ctx.out_dir / "features_frame0.csv", fm);
        io::write_feature_bin(ctx.out_dir, "features_frame0", fm);
    }
    return stage;
}

// Ground-truth-driven features for one user position; the synthetic fit
// sweep uses exact rotation parameters and skips the estimation chain.
std::vector<perception::FeatureMatrix> reference_features(const Scenario& sc, Vec2 user,
                                                          std::uint64_t seed, int frames) {
    Scene scene = sc.scene;
    scene.user_pos = user;
    channel::PathModelConfig pm;
    pm.gain = sc.channel.path_gain;
    pm.random_initial_phase = sc.channel.random_initial_phase;
    Rng master(seed);
    const auto paths = channel::ground_truth_paths(scene, pm, master.child(kPathSeed).next_u64());
    channel::SynthesisConfig syn;
    syn.noise_var = scenario_noise_var(sc, paths);
    syn.phase_error = sc.channel.phase_error;
    syn.frames = frames;
    const auto streams =
        channel::synthesize_all(scene, paths, syn, master.child(kCsiSeed).next_u64());

    perception::UserLocation loc{scene.user_pos, 0.0};
    perception::LinkScores scores;
    scores.s1 = perception::large_scale_scores(loc, scene);
    std::vector<std::vector<double>> powers;
    std::vector<spectral::Peak> rotation;
    for (std::size_t q = 0; q < streams.size(); ++q) {
        const auto& rx = scene.receivers[q];
        const double theta_user = array_angle(bearing(rx.pos, loc.pos), rx.orientation);
        powers.push_back(perception::beam_power_series(streams[q], theta_user, scene));
        for (const auto& p : paths[q])
            if (p.kind == PathKind::user_reflection) rotation.push_back({p.aoa, p.tof, 0.0});
    }
    scores.s2 = perception::small_scale_scores(powers);

    std::vector<perception::FeatureMatrix> features;
    features.reserve(static_cast<std::size_t>(frames));
    for (int u = 0; u < frames; ++u) {
        std::vector<CMatrix> rotated;
        for (std::size_t q = 0; q < streams.size(); ++q)
            rotated.push_back(perception::rotate_csi(streams[q].frames[static_cast<std::size_t>(u)],
                                                     rotation[q].theta, rotation[q].tau, scene));
        features.push_back(perception::build_feature_matrix(rotated, scores));
    }
    return features;
}

struct SweepBox {
    double x_min, x_span, y_min, y_span;
};

SweepBox sweep_box(const Scene& scene) {
    double x_min = scene.tx_pos.x, x_max = scene.tx_pos.x;
    double y_min = scene.tx_pos.y, y_max = scene.tx_pos.y;
    for (const auto& rx : scene.receivers) {
        x_min = std::min(x_min, rx.pos.x);
        x_max = std::max(x_max, rx.pos.x);
        y_min = std::min(y_min, rx.pos.y);
        y_max = std::max(y_max, rx.pos.y);
    }
    // Keep the sweep inside the deployment to avoid degenerate geometry.
    const double mx = 0.2 * (x_max - x_min), my = 0.2 * (y_max - y_min);
    return {x_min + mx, (x_max - x_min) - 2 * mx, y_min + my, (y_max - y_min) - 2 * my};
}

} // namespace

json run_simulate(const RunContext& ctx) {
    PerceptionState st;
    synthesize(ctx, st);
    return json{{"simulate", simulate_report(ctx, st, true)}};
}

json run_estimate(const RunContext& ctx) {
    PerceptionState st;
    synthesize(ctx, st);
    estimate(ctx, st);
    return json{{"simulate", simulate_report(ctx, st, false)},
                {"estimate", estimate_report(ctx, st, true)}};
}

json run_smsp(const RunContext& ctx) {
    PerceptionState st;
    synthesize(ctx, st);
    estimate(ctx, st);
    perceive(ctx, st);
    return json{{"simulate", simulate_report(ctx, st, false)},
                {"estimate", estimate_report(ctx, st, false)},
                {"smsp", smsp_report(ctx, st, true)}};
}

json run_skeleton_fit(const RunContext& ctx) {
    const auto& sc = ctx.scenario;
    if (sc.scene.n_antennas != 3 || sc.scene.n_subcarriers != 256)
        throw std::invalid_argument(
            "skeleton-fit: the encoder expects 3 antennas and 256 subcarriers");

    const SweepBox box = sweep_box(sc.scene);
    Rng master(ctx.seed);
    std::vector<skeleton::TrainingSample> dataset;
    json positions = json::array();
    for (int iy = 0; iy < sc.skeleton.grid_y; ++iy) {
        for (int ix = 0; ix < sc.skeleton.grid_x; ++ix) {
            const double fx = sc.skeleton.grid_x > 1
                                  ? ix / static_cast<double>(sc.skeleton.grid_x - 1)
                                  : 0.5;
            const double fy = sc.skeleton.grid_y > 1
                                  ? iy / static_cast<double>(sc.skeleton.grid_y - 1)
                                  : 0.5;
            const Vec2 user{box.x_min + fx * box.x_span, box.y_min + fy * box.y_span};
            const auto tag = static_cast<std::uint64_t>(iy * sc.skeleton.grid_x + ix);
            const auto features = reference_features(
                sc, user, master.child({kFitSeed, tag}).next_u64(), skeleton::kTimeSamples);
            const auto tensor = skeleton::encode_features(
                {features[0], features[1], features[2]});
            skeleton::TrainingSample sample;
            sample.features = skeleton::pooled_summary(tensor);
            sample.target = skeleton::embed_points(skeleton::template_skeleton(fx, fy));
            dataset.push_back(std::move(sample));
            positions.push_back({{"x_m", user.x}, {"y_m", user.y}});
        }
    }

    const auto model = skeleton::fit_baseline(dataset, sc.skeleton.ridge_lambda);
    io::write_model(ctx.out_dir, "model", model);

    json stage;
    stage["samples_count"] = model.samples;
    stage["training_mse_sq"] = model.training_mse;
    stage["training_mse_per_entry"] = model.training_mse / (2.0 * 18 * 18);
    stage["target_variance_sq"] = model.target_variance;
    stage["ridge_lambda"] = model.ridge_lambda;
    stage["positions"] = positions;
    return json{{"skeleton_fit", stage}};
}

json run_skeleton_predict(const RunContext& ctx) {
    const auto& sc = ctx.scenario;
    if (sc.scene.n_antennas != 3 || sc.scene.n_subcarriers != 256)
        throw std::invalid_argument(
            "skeleton-predict: the encoder expects 3 antennas and 256 subcarriers");
    const auto model_dir = ctx.model_dir.empty() ? ctx.out_dir : ctx.model_dir;
    const auto model = io::read_model(model_dir, "model");

    PerceptionState st;
    synthesize(ctx, st);
    estimate(ctx, st);
    perceive(ctx, st);
    if (st.features.size() < skeleton::kTimeSamples)
        throw std::invalid_argument("skeleton-predict: need at least 3 frames");

    const auto tensor =
        skeleton::encode_features({st.features[0], st.features[1], st.features[2]});
    const auto pose = skeleton::predict(model, tensor);
    const auto points = skeleton::pair_skeleton(pose);

    // Reference target at the true user position, for the report only.
    const SweepBox box = sweep_box(sc.scene);
    const double fx = box.x_span > 0.0 ? (sc.scene.user_pos.x - box.x_min) / box.x_span : 0.5;
    const double fy = box.y_span > 0.0 ? (sc.scene.user_pos.y - box.y_min) / box.y_span : 0.5;
    const auto target = skeleton::embed_points(skeleton::template_skeleton(fx, fy));

    json pts = json::array();
    for (const auto& p : points) pts.push_back({{"x_norm", p.x}, {"y_norm", p.y}});
    json stage;
    stage["points"] = pts;
    stage["reference_mse_sq"] = skeleton::mse_loss(pose, target);
    io::write_json(ctx.out_dir / "skeleton.json", stage);
    return json{{"skeleton_predict", stage}};
}

namespace {

json oracle_json(const pricing::OracleResult& res) {
    json j;
    j["feasible"] = res.feasible;
    if (res.feasible) {
        j["v_r"] = res.strategy.v_r;
        j["i_b"] = res.strategy.i_b;
        j["chi_s_units"] = res.allocation.perception_units;
        j["chi_ag_units"] = res.allocation.generation_units;
        j["u_us_util"] = res.u_us;
        j["u_vsp_util"] = res.u_vsp;
        j["q_s"] = res.qos.q_s;
        j["q_ag"] = res.qos.q_ag;
        j["q_t"] = res.qos.q_t;
    }
    return j;
}

} // namespace

json run_incentive_oracle(const RunContext& ctx) {
    if (!ctx.scenario.economy)
        throw std::invalid_argument("incentive-oracle: scenario has no economy block");
    const auto& eco = *ctx.scenario.economy;
    const auto result = pricing::oracle_optimal_pricing(eco.env, eco.grid);

    json stage = oracle_json(result);
    if (!eco.sweep_max_aps.empty()) {
        json sweep = json::array();
        for (int cap : eco.sweep_max_aps) {
            pricing::EnvState env = eco.env;
            env.resources.max_aps = cap;
            json row = oracle_json(pricing::oracle_optimal_pricing(env, eco.grid));
            row["max_aps_count"] = cap;
            sweep.push_back(row);
        }
        stage["ap_sweep"] = sweep;
    }
    io::write_json(ctx.out_dir / "oracle.json", stage);
    return json{{"incentive_oracle", stage}};
}

json run_train_policy(const RunContext& ctx) {
    if (!ctx.scenario.training)
        throw std::invalid_argument("train-policy: scenario has no training block");
    const auto& tr = *ctx.scenario.training;
    const auto grid = ctx.scenario.economy ? ctx.scenario.economy->grid : pricing::PricingGrid{};

    Rng master(ctx.seed);
    const auto dist = tr.distribution;
    const auto result = policy::train_policy(
        [&dist](Rng& rng) { return dist.sample(rng); }, grid, tr.config,
        master.child(kTrainSeed).next_u64());

    io::PolicyCheckpoint ckpt{result.denoiser, result.critic, result.schedule, result.box,
                              tr.config.reward_scale};
    io::write_checkpoint(ctx.out_dir, "checkpoint", ckpt);
    io::write_reward_curve(ctx.out_dir / "reward_curve.csv", result.reward_curve);

    json stage;
    stage["epochs_count"] = result.epochs_run;
    stage["final_reward_util"] = result.reward_curve.back();
    const std::size_t tail = std::min<std::size_t>(50, result.reward_curve.size());
    double avg = 0.0;
    for (std::size_t i = result.reward_curve.size() - tail; i < result.reward_curve.size(); ++i)
        avg += result.reward_curve[i];
    stage["final_reward_ma50_util"] = avg / static_cast<double>(tail);
    return json{{"train_policy", stage}};
}

json run_eval_policy(const RunContext& ctx) {
    if (!ctx.scenario.training)
        throw std::invalid_argument("eval-policy: scenario has no training block");
    const auto& tr = *ctx.scenario.training;
    const auto grid = ctx.scenario.economy ? ctx.scenario.economy->grid : pricing::PricingGrid{};
    const auto ckpt_dir = ctx.checkpoint_dir.empty() ? ctx.out_dir : ctx.checkpoint_dir;
    const auto ckpt = io::read_checkpoint(ckpt_dir, "checkpoint");

    Rng master(ctx.seed);
    Rng draw_rng = master.child(kEvalSeed);

    json rows = json::array();
    int successes = 0, feasible_oracle = 0, violations = 0;
    std::ofstream csv(ctx.out_dir / "eval.csv");
    csv.precision(12);
    csv << "draw,v_r_policy,i_b_policy,u_us_policy_util,policy_feasible,"
           "v_r_oracle,i_b_oracle,u_us_oracle_util,ratio\n";
    for (int i = 0; i < tr.eval_draws; ++i) {
        const auto env = tr.distribution.sample(draw_rng);
        const auto cond = policy::encode_env(env);
        const auto strat = policy::generate_strategy(
            cond, ckpt.denoiser, ckpt.schedule, ckpt.box,
            master.child({kPolicySeed, static_cast<std::uint64_t>(i)}).next_u64());
        const auto alloc = pricing::vsp_best_response(strat, env);
        const double u_vsp = pricing::vsp_utility(strat, alloc, env);
        const bool feasible = u_vsp >= env.u_th;
        const double u_us = pricing::user_utility(strat, alloc, env);
        if (feasible && !pricing::satisfies_constraints(strat, alloc, env)) ++violations;

        const auto oracle = pricing::oracle_optimal_pricing(env, grid);
        double ratio = 0.0;
        if (oracle.feasible) {
            ++feasible_oracle;
            ratio = feasible && oracle.u_us != 0.0 ? u_us / oracle.u_us : 0.0;
            if (feasible && u_us >= 0.9 * oracle.u_us) ++successes;
        }
        rows.push_back({{"u_us_policy_util", feasible ? u_us : 0.0},
                        {"policy_feasible", feasible},
                        {"u_us_oracle_util", oracle.feasible ? oracle.u_us : 0.0},
                        {"ratio", ratio}});
        csv << i << ',' << strat.v_r << ',' << strat.i_b << ',' << u_us << ',' << feasible << ','
            << (oracle.feasible ? oracle.strategy.v_r : 0.0) << ','
            << (oracle.feasible ? oracle.strategy.i_b : 0.0) << ','
            << (oracle.feasible ? oracle.u_us : 0.0) << ',' << ratio << '\n';
    }

    json stage;
    stage["draws_count"] = tr.eval_draws;
    stage["oracle_feasible_count"] = feasible_oracle;
    stage["success_count_at_0p9"] = successes;
    stage["success_ratio"] =
        feasible_oracle > 0 ? static_cast<double>(successes) / feasible_oracle : 0.0;
    stage["constraint_violations_count"] = violations;
    stage["draws"] = rows;
    return json{{"eval_policy", stage}};
}

json run_pipeline(const RunContext& ctx) {
    PerceptionState st;
    synthesize(ctx, st);
    estimate(ctx, st);
    perceive(ctx, st);

    json report;
    report["simulate"] = simulate_report(ctx, st, true);
    report["estimate"] = estimate_report(ctx, st, true);
    report["smsp"] = smsp_report(ctx, st, true);

    if (ctx.scenario.scene.n_antennas == 3 && ctx.scenario.scene.n_subcarriers == 256) {
        report.update(run_skeleton_fit(ctx));
        RunContext predict_ctx = ctx;
        predict_ctx.model_dir = ctx.out_dir;
        report.update(run_skeleton_predict(predict_ctx));
    }
    if (ctx.scenario.economy) report.update(run_incentive_oracle(ctx));
    return report;
}

json run(const std::string& subcommand, const RunContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(ctx.out_dir);

    json stages;
    if (subcommand == "simulate-csi") stages = run_simulate(ctx);
    else if (subcommand == "estimate") stages = run_estimate(ctx);
    else if (subcommand == "smsp") stages = run_smsp(ctx);
    else if (subcommand == "skeleton-fit") stages = run_skeleton_fit(ctx);
    else if (subcommand == "skeleton-predict") stages = run_skeleton_predict(ctx);
    else if (subcommand == "incentive-oracle") stages = run_incentive_oracle(ctx);
    else if (subcommand == "train-policy") stages = run_train_policy(ctx);
    else if (subcommand == "eval-policy") stages = run_eval_policy(ctx);
    else if (subcommand == "pipeline") stages = run_pipeline(ctx);
    else throw std::invalid_argument("unknown subcommand: " + subcommand);

    json report;
    report["schema"] = "csisim-report-v1";
    report["subcommand"] = subcommand;
    report["scenario_name"] = ctx.scenario.name;
    report["scenario_path"] = ctx.scenario_path;
    report["seed"] = ctx.seed;
    report["version"] = io::kVersion;
    report["stages"] = stages;

    const auto t1 = std::chrono::steady_clock::now();
    const auto now = std::chrono::system_clock::now();
    report["timing"] = {
        {"started_unix_s",
         std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
        {"wall_s", std::chrono::duration<double>(t1 - t0).count()}};
    io::write_json(ctx.out_dir / "report.json", report);
    return report;
}

} // namespace runner
} // namespace csisim
