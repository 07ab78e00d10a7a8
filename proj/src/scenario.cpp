#include "csisim/scenario.hpp"

#include <fstream>
#include <set>

#include "csisim/channel.hpp"
#include "csisim/geometry.hpp"

namespace csisim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ScenarioError("scenario: " + path + ": " + what);
}

// Rejects keys outside the allowed set, reporting the JSON path.
void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) fail(path + "." + key, "unknown key");
    }
}

template <typename T>
T get_as(const json& obj, const std::string& path, const std::string& key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

template <typename T>
void read_opt(const json& obj, const std::string& path, const std::string& key, T& out) {
    if (obj.contains(key)) out = get_as<T>(obj, path, key);
}

Vec2 read_vec2(const json& obj, const std::string& path, const std::string& key) {
    const auto v = get_as<std::vector<double>>(obj, path, key);
    if (v.size() != 2) fail(path + "." + key, "expected [x, y]");
    return {v[0], v[1]};
}

Scene parse_scene(const json& j, const std::string& path) {
    check_keys(j, path,
               {"tx_pos", "receivers", "user_pos", "f_center_hz", "bandwidth_hz", "n_subcarriers",
                "n_antennas", "antenna_spacing_m", "packet_rate_hz"});
    Scene s;
    s.tx_pos = read_vec2(j, path, "tx_pos");
    s.user_pos = read_vec2(j, path, "user_pos");
    read_opt(j, path, "f_center_hz", s.f_center);
    read_opt(j, path, "bandwidth_hz", s.bandwidth);
    read_opt(j, path, "n_subcarriers", s.n_subcarriers);
    read_opt(j, path, "n_antennas", s.n_antennas);
    read_opt(j, path, "antenna_spacing_m", s.antenna_spacing);
    read_opt(j, path, "packet_rate_hz", s.packet_rate);

    if (!j.contains("receivers")) fail(path + ".receivers", "missing");
    const auto& rxs = j.at("receivers");
    if (!rxs.is_array() || rxs.empty()) fail(path + ".receivers", "expected a non-empty array");
    int idx = 0;
    for (const auto& r : rxs) {
        const std::string rpath = path + ".receivers[" + std::to_string(idx) + "]";
        check_keys(r, rpath, {"id", "pos", "orientation_deg"});
        ReceiverSpec rx;
        rx.id = r.contains("id") ? get_as<int>(r, rpath, "id") : idx;
        rx.pos = read_vec2(r, rpath, "pos");
        rx.orientation = deg_to_rad(get_as<double>(r, rpath, "orientation_deg"));
        s.receivers.push_back(rx);
        ++idx;
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return s;
}

ChannelBlock parse_channel(const json& j, const std::string& path) {
    check_keys(j, path,
               {"frames", "snr_db", "noise_var", "phase_error", "path_gain",
                "random_initial_phase"});
    ChannelBlock c;
    read_opt(j, path, "frames", c.frames);
    if (j.contains("snr_db")) c.snr_db = get_as<double>(j, path, "snr_db");
    if (j.contains("noise_var")) c.noise_var = get_as<double>(j, path, "noise_var");
    if (c.snr_db && c.noise_var) fail(path, "snr_db and noise_var are mutually exclusive");
    read_opt(j, path, "phase_error", c.phase_error);
    read_opt(j, path, "path_gain", c.path_gain);
    read_opt(j, path, "random_initial_phase", c.random_initial_phase);
    if (c.frames < 1) fail(path + ".frames", "must be >= 1");
    return c;
}

EstimationBlock parse_estimation(const json& j, const std::string& path) {
    check_keys(j, path,
               {"window_antennas", "window_subcarriers", "theta_min_deg", "theta_max_deg",
                "theta_step_deg", "tau_min_ns", "tau_max_ns", "tau_step_ns",
                "count_sub_snapshots", "localization", "use_true_rotation"});
    EstimationBlock e;
    read_opt(j, path, "window_antennas", e.config.win_antennas);
    read_opt(j, path, "window_subcarriers", e.config.win_subcarriers);
    double th_min = -90.0, th_max = 90.0, th_step = 1.0;
    double tau_min = 0.0, tau_max = 200.0, tau_step = 1.0;
    read_opt(j, path, "theta_min_deg", th_min);
    read_opt(j, path, "theta_max_deg", th_max);
    read_opt(j, path, "theta_step_deg", th_step);
    read_opt(j, path, "tau_min_ns", tau_min);
    read_opt(j, path, "tau_max_ns", tau_max);
    read_opt(j, path, "tau_step_ns", tau_step);
    e.config.grid.theta_min = deg_to_rad(th_min);
    e.config.grid.theta_max = deg_to_rad(th_max);
    e.config.grid.theta_step = deg_to_rad(th_step);
    e.config.grid.tau_min = tau_min * 1e-9;
    e.config.grid.tau_max = tau_max * 1e-9;
    e.config.grid.tau_step = tau_step * 1e-9;
    read_opt(j, path, "count_sub_snapshots", e.config.count_sub_snapshots);
    read_opt(j, path, "use_true_rotation", e.use_true_rotation);
    if (j.contains("localization")) {
        const auto& l = j.at("localization");
        const std::string lp = path + ".localization";
        check_keys(l, lp, {"margin_m", "coarse_step_m", "refine_levels", "tof_weight", "max_candidates"});
        read_opt(l, lp, "margin_m", e.loc_margin);
        read_opt(l, lp, "coarse_step_m", e.loc_coarse_step);
        read_opt(l, lp, "refine_levels", e.loc_refine_levels);
        read_opt(l, lp, "tof_weight", e.loc_tof_weight);
        read_opt(l, lp, "max_candidates", e.loc_max_candidates);
    }
    return e;
}

pricing::SaturatingCurve parse_curve(const json& j, const std::string& path) {
    check_keys(j, path, {"a", "b", "x_offset"});
    pricing::SaturatingCurve c;
    read_opt(j, path, "a", c.a);
    read_opt(j, path, "b", c.b);
    read_opt(j, path, "x_offset", c.x_offset);
    return c;
}

EconomyBlock parse_economy(const json& j, const std::string& path) {
    check_keys(j, path,
               {"v_c", "v_m", "total_units", "u_th", "maps", "resources", "pricing_grid",
                "sweep_max_aps"});
    EconomyBlock e;
    read_opt(j, path, "v_c", e.env.v_c);
    read_opt(j, path, "v_m", e.env.v_m);
    read_opt(j, path, "total_units", e.env.total_units);
    read_opt(j, path, "u_th", e.env.u_th);
    if (j.contains("maps")) {
        const auto& m = j.at("maps");
        const std::string mp = path + ".maps";
        check_keys(m, mp, {"perception", "brisque", "tv"});
        if (m.contains("perception")) e.env.maps.perception = parse_curve(m.at("perception"), mp + ".perception");
        if (m.contains("brisque")) e.env.maps.brisque = parse_curve(m.at("brisque"), mp + ".brisque");
        if (m.contains("tv")) e.env.maps.tv = parse_curve(m.at("tv"), mp + ".tv");
    }
    if (j.contains("resources")) {
        const auto& r = j.at("resources");
        const std::string rp = path + ".resources";
        check_keys(r, rp, {"units_per_ap", "skeleton_units", "units_per_step", "max_aps"});
        read_opt(r, rp, "units_per_ap", e.env.resources.units_per_ap);
        read_opt(r, rp, "skeleton_units", e.env.resources.skeleton_units);
        read_opt(r, rp, "units_per_step", e.env.resources.units_per_step);
        read_opt(r, rp, "max_aps", e.env.resources.max_aps);
    }
    if (j.contains("pricing_grid")) {
        const auto& g = j.at("pricing_grid");
        const std::string gp = path + ".pricing_grid";
        check_keys(g, gp, {"v_r_max", "v_r_step", "i_b_max", "i_b_step"});
        read_opt(g, gp, "v_r_max", e.grid.v_r_max);
        read_opt(g, gp, "v_r_step", e.grid.v_r_step);
        read_opt(g, gp, "i_b_max", e.grid.i_b_max);
        read_opt(g, gp, "i_b_step", e.grid.i_b_step);
    }
    read_opt(j, path, "sweep_max_aps", e.sweep_max_aps);
    try {
        e.env.validate();
    } catch (const std::invalid_argument& ex) {
        fail(path, ex.what());
    }
    return e;
}

TrainingBlock parse_training(const json& j, const std::string& path, const EconomyBlock* economy) {
    check_keys(j, path,
               {"diffusion_steps", "beta_min", "beta_max", "epochs", "batch", "actor_lr",
                "critic_lr", "soft_target", "discount", "explore_noise", "hidden",
                "reward_scale", "penalty", "action_reg", "coverage_fraction", "warmup_epochs", "lr_decay_floor",
                "plateau_window", "plateau_tol", "eval_draws",
                "env_distribution"});
    TrainingBlock t;
    if (economy != nullptr) t.distribution.base = economy->env;
    auto& c = t.config;
    read_opt(j, path, "diffusion_steps", c.diffusion_steps);
    read_opt(j, path, "beta_min", c.beta_min);
    read_opt(j, path, "beta_max", c.beta_max);
    read_opt(j, path, "epochs", c.epochs);
    read_opt(j, path, "batch", c.batch);
    read_opt(j, path, "actor_lr", c.actor_lr);
    read_opt(j, path, "critic_lr", c.critic_lr);
    read_opt(j, path, "soft_target", c.soft_target);
    read_opt(j, path, "discount", c.discount);
    read_opt(j, path, "explore_noise", c.explore_noise);
    read_opt(j, path, "hidden", c.hidden);
    read_opt(j, path, "reward_scale", c.reward_scale);
    read_opt(j, path, "penalty", c.penalty);
    read_opt(j, path, "action_reg", c.action_reg);
    read_opt(j, path, "coverage_fraction", c.coverage_fraction);
    read_opt(j, path, "warmup_epochs", c.warmup_epochs);
    read_opt(j, path, "lr_decay_floor", c.lr_decay_floor);
    read_opt(j, path, "plateau_window", c.plateau_window);
    read_opt(j, path, "plateau_tol", c.plateau_tol);
    read_opt(j, path, "eval_draws", t.eval_draws);
    if (j.contains("env_distribution")) {
        const auto& d = j.at("env_distribution");
        const std::string dp = path + ".env_distribution";
        check_keys(d, dp, {"v_c_min", "v_c_max", "v_m_min", "v_m_max", "u_th_min", "u_th_max", "map_jitter"});
        read_opt(d, dp, "v_c_min", t.distribution.v_c_min);
        read_opt(d, dp, "v_c_max", t.distribution.v_c_max);
        read_opt(d, dp, "v_m_min", t.distribution.v_m_min);
        read_opt(d, dp, "v_m_max", t.distribution.v_m_max);
        read_opt(d, dp, "u_th_min", t.distribution.u_th_min);
        read_opt(d, dp, "u_th_max", t.distribution.u_th_max);
        read_opt(d, dp, "map_jitter", t.distribution.map_jitter);
    }
    return t;
}

SkeletonBlock parse_skeleton(const json& j, const std::string& path) {
    check_keys(j, path, {"grid_x", "grid_y", "ridge_lambda"});
    SkeletonBlock s;
    read_opt(j, path, "grid_x", s.grid_x);
    read_opt(j, path, "grid_y", s.grid_y);
    read_opt(j, path, "ridge_lambda", s.ridge_lambda);
    if (s.grid_x * s.grid_y < 2) fail(path, "fit grid must contain >= 2 positions");
    return s;
}

OutputBlock parse_output(const json& j, const std::string& path) {
    check_keys(j, path, {"write_csi", "write_spectrum_csv", "write_feature_csv"});
    OutputBlock o;
    read_opt(j, path, "write_csi", o.write_csi);
    read_opt(j, path, "write_spectrum_csv", o.write_spectrum_csv);
    read_opt(j, path, "write_feature_csv", o.write_feature_csv);
    return o;
}

} // namespace

Scenario parse_scenario(const nlohmann::json& doc) {
    check_keys(doc, "$",
               {"name", "scene", "channel", "estimation", "skeleton", "economy", "training",
                "output"});
    Scenario sc;
    read_opt(doc, "$", "name", sc.name);
    if (!doc.contains("scene")) fail("$.scene", "missing");
    sc.scene = parse_scene(doc.at("scene"), "$.scene");
    if (doc.contains("channel")) sc.channel = parse_channel(doc.at("channel"), "$.channel");
    if (doc.contains("estimation"))
        sc.estimation = parse_estimation(doc.at("estimation"), "$.estimation");
    if (doc.contains("skeleton")) sc.skeleton = parse_skeleton(doc.at("skeleton"), "$.skeleton");
    if (doc.contains("economy")) sc.economy = parse_economy(doc.at("economy"), "$.economy");
    if (doc.contains("training"))
        sc.training = parse_training(doc.at("training"), "$.training",
                                     sc.economy ? &*sc.economy : nullptr);
    if (doc.contains("output")) sc.output = parse_output(doc.at("output"), "$.output");
    return sc;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ScenarioError("scenario: override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ScenarioError("scenario: empty key segment in override: " + key);
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ScenarioError("scenario: cannot open " + path.string());
    nlohmann::json doc;
    try {
        f >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError("scenario: parse error in " + path.string() + ": " + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    Scenario sc = parse_scenario(doc);
    if (sc.name.empty()) sc.name = path.stem().string();
    return sc;
}

double scenario_noise_var(const Scenario& sc, const std::vector<std::vector<PathSpec>>& paths) {
    if (sc.channel.noise_var) return *sc.channel.noise_var;
    if (sc.channel.snr_db) return channel::noise_var_for_snr(sc.scene, paths, *sc.channel.snr_db);
    return 0.0;
}

} // namespace csisim
