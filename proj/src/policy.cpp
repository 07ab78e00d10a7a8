#include "csisim/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace csisim {
namespace policy {

namespace {
constexpr std::uint64_t kTerminalStream = 1;
constexpr std::uint64_t kStepStream = 2;
constexpr std::uint64_t kEnvStream = 3;
constexpr std::uint64_t kInitStream = 4;
constexpr std::uint64_t kExploreStream = 5;
constexpr std::uint64_t kCoverageStream = 6;
} // namespace

BetaSchedule BetaSchedule::linear(int steps, double beta_min, double beta_max) {
    if (steps < 1) throw std::invalid_argument("schedule: steps must be >= 1");
    BetaSchedule s;
    s.beta.resize(static_cast<std::size_t>(steps));
    if (steps == 1) {
        s.beta[0] = beta_max;
    } else {
        for (int t = 0; t < steps; ++t)
            s.beta[static_cast<std::size_t>(t)] =
                beta_min + (beta_max - beta_min) * t / static_cast<double>(steps - 1);
    }
    s.validate();
    return s;
}

void BetaSchedule::validate() const {
    for (double b : beta)
        if (b < 0.0 || b >= 1.0) throw std::invalid_argument("schedule: beta must lie in [0, 1)");
}

double BetaSchedule::theta(int t) const {
    if (t < 1 || t > steps()) throw std::out_of_range("schedule: step out of range");
    return 1.0 - beta[static_cast<std::size_t>(t - 1)];
}

double BetaSchedule::theta_bar(int t) const {
    if (t < 0 || t > steps()) throw std::out_of_range("schedule: step out of range");
    double p = 1.0;
    for (int i = 1; i <= t; ++i) p *= theta(i);
    return p;
}

Action forward_sample(const Action& s0, int t, const BetaSchedule& schedule, Rng& rng) {
    if (t < 1 || t > schedule.steps())
        throw std::out_of_range("forward_sample: step out of range");
    const double tb = schedule.theta_bar(t);
    const Action z{rng.normal(), rng.normal()};
    return std::sqrt(tb) * s0 + std::sqrt(1.0 - tb) * z;
}

PosteriorParams posterior_params(const Action& s_t, const Action& eps_estimate, int t,
                                 const BetaSchedule& schedule) {
    if (t < 1 || t > schedule.steps())
        throw std::out_of_range("posterior_params: step out of range");
    const double beta_t = schedule.beta[static_cast<std::size_t>(t - 1)];
    const double tb = schedule.theta_bar(t);
    const double tb_prev = schedule.theta_bar(t - 1);
    PosteriorParams p;
    if (beta_t == 0.0) {
        p.mu = s_t;
        p.beta_tilde = 0.0;
        return p;
    }
    p.mu = (s_t - beta_t / std::sqrt(1.0 - tb) * eps_estimate) / std::sqrt(schedule.theta(t));
    p.beta_tilde = (1.0 - tb_prev) * beta_t / (1.0 - tb);
    return p;
}

DenoiserNet::DenoiserNet(int steps_, int cond_dim_, int hidden, Rng& rng)
    : net(2 + steps_ + cond_dim_, hidden, 2, rng), steps(steps_), cond_dim(cond_dim_) {}

Eigen::VectorXd DenoiserNet::assemble_input(const Action& s_t, int t,
                                            const Eigen::VectorXd& cond) const {
    if (cond.size() != cond_dim) throw std::invalid_argument("denoiser: condition size mismatch");
    Eigen::VectorXd in = Eigen::VectorXd::Zero(2 + steps + cond_dim);
    in(0) = s_t(0);
    in(1) = s_t(1);
    in(1 + t) = 1.0; // one-hot time embedding, t in [1, T]
    in.tail(cond_dim) = cond;
    return in;
}

Action DenoiserNet::eval(const Action& s_t, int t, const Eigen::VectorXd& cond) const {
    const Eigen::VectorXd out = net.forward(assemble_input(s_t, t, cond));
    return {out(0), out(1)};
}

Action reverse_step(const Action& s_t, int t, const Eigen::VectorXd& cond,
                    const DenoiserNet& denoiser, const BetaSchedule& schedule, Rng& rng) {
    if (t < 1 || t > schedule.steps())
        throw std::out_of_range("reverse_step: step out of range");
    const double beta_t = schedule.beta[static_cast<std::size_t>(t - 1)];
    const double tb = schedule.theta_bar(t);
    const Action eps = denoiser.eval(s_t, t, cond);
    Action mean = s_t;
    if (beta_t > 0.0) mean = (s_t - beta_t / std::sqrt(1.0 - tb) * eps) / std::sqrt(schedule.theta(t));
    if (t == 1) return mean;
    const Action z{rng.normal(), rng.normal()};
    return mean + std::sqrt(beta_t) * z;
}

pricing::PricingStrategy ActionBox::to_prices(const Action& squashed) const {
    pricing::PricingStrategy s;
    s.v_r = std::clamp(0.5 * (squashed(0) + 1.0) * v_r_max, 0.0, v_r_max);
    s.i_b = std::clamp(0.5 * (squashed(1) + 1.0) * i_b_max, 0.0, i_b_max);
    return s;
}

pricing::PricingStrategy generate_strategy(const Eigen::VectorXd& cond,
                                           const DenoiserNet& denoiser,
                                           const BetaSchedule& schedule, const ActionBox& box,
                                           std::uint64_t seed) {
    Rng master(seed);
    Rng term = master.child(kTerminalStream);
    Action s{term.normal(), term.normal()};
    for (int t = schedule.steps(); t >= 1; --t) {
        Rng step = master.child({kStepStream, static_cast<std::uint64_t>(t)});
        s = reverse_step(s, t, cond, denoiser, schedule, step);
    }
    return box.to_prices(box.squash(s));
}

// Fixed affine encoding centered on the calibrated defaults, scaled so the
// bundled scenario distribution spans roughly [-1, 1] per coordinate.
Eigen::VectorXd encode_env(const pricing::EnvState& env) {
    const pricing::QosMappings cal = pricing::QosMappings::calibrated();
    Eigen::VectorXd c(env_encoding_dim());
    c << (env.maps.perception.a / cal.perception.a - 1.0) / 0.05,
        env.maps.perception.b / cal.perception.b - 1.0,
        (env.maps.brisque.a / cal.brisque.a - 1.0) / 0.05,
        env.maps.brisque.b / cal.brisque.b - 1.0,
        (env.maps.tv.a / cal.tv.a - 1.0) / 0.05, env.maps.tv.b / cal.tv.b - 1.0,
        (env.v_c - 30.0) / 2.0, (env.v_m - 40.0) / 2.0,
        static_cast<double>(env.total_units) / 100.0 - 1.0, (env.u_th - 2850.0) / 350.0;
    return c;
}

int env_encoding_dim() { return 10; }

pricing::EnvState EnvDistribution::sample(Rng& rng) const {
    pricing::EnvState env = base;
    env.v_c = rng.uniform(v_c_min, v_c_max);
    env.v_m = rng.uniform(v_m_min, v_m_max);
    env.u_th = rng.uniform(u_th_min, u_th_max);
    if (map_jitter > 0.0) {
        env.maps.perception.a *= 1.0 + rng.uniform(-map_jitter, map_jitter);
        env.maps.brisque.a *= 1.0 + rng.uniform(-map_jitter, map_jitter);
        env.maps.tv.a *= 1.0 + rng.uniform(-map_jitter, map_jitter);
    }
    return env;
}

double strategy_reward(const pricing::PricingStrategy& s, const pricing::EnvState& env,
                       double penalty_raw) {
    const pricing::Allocation alloc = pricing::vsp_best_response(s, env);
    const double u_vsp = pricing::vsp_utility(s, alloc, env);
    if (u_vsp < env.u_th) return -(env.u_th - u_vsp) - penalty_raw;
    return pricing::user_utility(s, alloc, env);
}

ActorBatch make_actor_batch(const std::vector<Eigen::VectorXd>& conds, int steps, Rng& rng,
                            double explore_noise) {
    ActorBatch b;
    b.conds = conds;
    b.chain_noise.resize(conds.size());
    b.terminal.resize(conds.size());
    b.explore.resize(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i) {
        b.terminal[i] = {rng.normal(), rng.normal()};
        b.chain_noise[i].resize(static_cast<std::size_t>(std::max(0, steps - 1)));
        for (int t = steps; t >= 2; --t)
            b.chain_noise[i][static_cast<std::size_t>(steps - t)] = {rng.normal(), rng.normal()};
        b.explore[i] = explore_noise > 0.0
                           ? Action{explore_noise * rng.normal(), explore_noise * rng.normal()}
                           : Action{0.0, 0.0};
    }
    return b;
}

// Loss: L = mean_i [ -Q(tanh(s_0^i + xi_i), c_i) + action_reg * |s_0^i|^2 ];
// gradients flow through the whole reverse chain by reparameterization.
double actor_loss(const DenoiserNet& denoiser, const Mlp& critic, const BetaSchedule& schedule,
                  const ActorBatch& batch, double action_reg, Mlp::Gradients* grads) {
    const int steps = schedule.steps();
    const int n = static_cast<int>(batch.conds.size());
    if (n == 0) throw std::invalid_argument("actor_loss: empty batch");

    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd& cond = batch.conds[static_cast<std::size_t>(i)];

        // Forward chain, keeping the caches for backprop.
        std::vector<Mlp::Cache> caches(static_cast<std::size_t>(steps));
        std::vector<Action> states(static_cast<std::size_t>(steps) + 1); // states[t] = s_t
        states[static_cast<std::size_t>(steps)] = batch.terminal[static_cast<std::size_t>(i)];
        for (int t = steps; t >= 1; --t) {
            const Action& s_t = states[static_cast<std::size_t>(t)];
            const Eigen::VectorXd in = denoiser.assemble_input(s_t, t, cond);
            const Eigen::VectorXd eps =
                denoiser.net.forward(in, caches[static_cast<std::size_t>(t - 1)]);
            const double beta_t = schedule.beta[static_cast<std::size_t>(t - 1)];
            const double tb = schedule.theta_bar(t);
            Action mean = s_t;
            if (beta_t > 0.0)
                mean = (s_t - beta_t / std::sqrt(1.0 - tb) * Action(eps(0), eps(1))) /
                       std::sqrt(schedule.theta(t));
            Action next = mean;
            if (t > 1)
                next += std::sqrt(beta_t) *
                        batch.chain_noise[static_cast<std::size_t>(i)][static_cast<std::size_t>(steps - t)];
            states[static_cast<std::size_t>(t - 1)] = next;
        }

        const Action raw = states[0] + batch.explore[static_cast<std::size_t>(i)];
        const Action squashed = raw.array().tanh();
        Eigen::VectorXd critic_in(2 + cond.size());
        critic_in << squashed(0), squashed(1), cond;

        Mlp::Cache critic_cache;
        const double q = critic.forward(critic_in, critic_cache)(0);
        loss += (-q + action_reg * states[0].squaredNorm()) / n;

        if (grads == nullptr) continue;

        // dL/d squashed via the critic input gradient.
        Mlp::Gradients critic_sink;
        critic_sink.setZero(critic);
        Eigen::VectorXd gq(1);
        gq(0) = -1.0 / n;
        const Eigen::VectorXd critic_in_grad = critic.backward(critic_cache, gq, critic_sink);
        Action g{critic_in_grad(0), critic_in_grad(1)};
        g(0) *= 1.0 - squashed(0) * squashed(0);
        g(1) *= 1.0 - squashed(1) * squashed(1);
        g += (2.0 * action_reg / n) * states[0];

        // Walk the chain upward accumulating denoiser gradients.
        for (int t = 1; t <= steps; ++t) {
            const double beta_t = schedule.beta[static_cast<std::size_t>(t - 1)];
            if (beta_t == 0.0) continue; // step was the identity
            const double inv_sqrt_theta = 1.0 / std::sqrt(schedule.theta(t));
            const double k_t = beta_t / std::sqrt(1.0 - schedule.theta_bar(t));
            const Eigen::Vector2d g_eps = -k_t * inv_sqrt_theta * g;
            const Eigen::VectorXd in_grad =
                denoiser.net.backward(caches[static_cast<std::size_t>(t - 1)], g_eps, *grads);
            g = inv_sqrt_theta * g + Action{in_grad(0), in_grad(1)};
        }
    }
    return loss;
}

TrainResult train_policy(const EnvSampler& sampler, const pricing::PricingGrid& grid,
                         const TrainConfig& cfg, std::uint64_t seed) {
    if (cfg.epochs < 1 || cfg.batch < 1)
        throw std::invalid_argument("train_policy: epochs and batch must be >= 1");

    Rng master(seed);
    Rng init = master.child(kInitStream);

    TrainResult result;
    result.schedule = BetaSchedule::linear(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max);
    result.box = {grid.v_r_max, grid.i_b_max};
    result.denoiser = DenoiserNet(cfg.diffusion_steps, env_encoding_dim(), cfg.hidden, init);
    result.critic.net = Mlp(2 + env_encoding_dim(), cfg.hidden, 1, init);
    Mlp critic_target = result.critic.net;

    AdamOptimizer actor_opt(result.denoiser.net, cfg.actor_lr);
    AdamOptimizer critic_opt(result.critic.net, cfg.critic_lr);

    const double penalty_raw = cfg.penalty * cfg.reward_scale;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr_scale =
            cfg.epochs > 1 ? 1.0 - (1.0 - cfg.lr_decay_floor) * epoch / (cfg.epochs - 1) : 1.0;
        actor_opt.set_learning_rate(cfg.actor_lr * lr_scale);
        critic_opt.set_learning_rate(cfg.critic_lr * lr_scale);
        Rng epoch_rng = master.child({kEnvStream, static_cast<std::uint64_t>(epoch)});

        std::vector<pricing::EnvState> envs;
        std::vector<Eigen::VectorXd> conds;
        envs.reserve(static_cast<std::size_t>(cfg.batch));
        conds.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) {
            envs.push_back(sampler(epoch_rng));
            conds.push_back(encode_env(envs.back()));
        }

        Rng noise_rng = master.child({kExploreStream, static_cast<std::uint64_t>(epoch)});
        ActorBatch batch =
            make_actor_batch(conds, cfg.diffusion_steps, noise_rng, cfg.explore_noise);

        // Roll the chain once per sample to get executed actions and rewards.
        std::vector<Action> squashed(static_cast<std::size_t>(cfg.batch));
        std::vector<double> rewards(static_cast<std::size_t>(cfg.batch));
        double epoch_reward = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(+ : epoch_reward)
        for (int b = 0; b < cfg.batch; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            Action s = batch.terminal[bi];
            for (int t = cfg.diffusion_steps; t >= 1; --t) {
                const Action eps = result.denoiser.eval(s, t, conds[bi]);
                const double beta_t = result.schedule.beta[static_cast<std::size_t>(t - 1)];
                if (beta_t > 0.0)
                    s = (s - beta_t / std::sqrt(1.0 - result.schedule.theta_bar(t)) * eps) /
                        std::sqrt(result.schedule.theta(t));
                if (t > 1)
                    s += std::sqrt(beta_t) *
                         batch.chain_noise[bi][static_cast<std::size_t>(cfg.diffusion_steps - t)];
            }
            s += batch.explore[bi];
            squashed[bi] = s.array().tanh();
            const pricing::PricingStrategy strat = result.box.to_prices(squashed[bi]);
            rewards[bi] = strategy_reward(strat, envs[bi], penalty_raw);
            epoch_reward += rewards[bi];
        }
        epoch_reward /= cfg.batch;
        result.reward_curve.push_back(epoch_reward);

        // Coverage slice: random actions scored in the same environments so
        // the critic keeps seeing the whole box, not just the policy mode.
        const int n_cov = static_cast<int>(std::lround(cfg.coverage_fraction * cfg.batch));
        std::vector<Action> cov_actions(static_cast<std::size_t>(n_cov));
        std::vector<double> cov_rewards(static_cast<std::size_t>(n_cov));
        Rng cov_rng = master.child({kCoverageStream, static_cast<std::uint64_t>(epoch)});
        for (int k = 0; k < n_cov; ++k) {
            cov_actions[static_cast<std::size_t>(k)] = {cov_rng.uniform(-1.0, 1.0),
                                                        cov_rng.uniform(-1.0, 1.0)};
        }
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < n_cov; ++k) {
            const auto ki = static_cast<std::size_t>(k);
            const auto ei = static_cast<std::size_t>(k % cfg.batch);
            const pricing::PricingStrategy strat = result.box.to_prices(cov_actions[ki]);
            cov_rewards[ki] = strategy_reward(strat, envs[ei], penalty_raw);
        }

        // Critic regression on observed (action, condition, reward).
        Mlp::Gradients critic_grads;
        critic_grads.setZero(result.critic.net);
        double critic_loss = 0.0;
        const int n_rows = cfg.batch + n_cov;
        for (int row = 0; row < n_rows; ++row) {
            const bool cov = row >= cfg.batch;
            const auto bi = static_cast<std::size_t>(cov ? (row - cfg.batch) % cfg.batch : row);
            const Action& a = cov ? cov_actions[static_cast<std::size_t>(row - cfg.batch)]
                                  : squashed[bi];
            const double r = cov ? cov_rewards[static_cast<std::size_t>(row - cfg.batch)]
                                 : rewards[bi];
            Eigen::VectorXd in(2 + env_encoding_dim());
            in << a(0), a(1), conds[bi];
            Mlp::Cache cache;
            const double pred = result.critic.net.forward(in, cache)(0);
            const double err = pred - r / cfg.reward_scale;
            critic_loss += err * err / n_rows;
            Eigen::VectorXd g(1);
            g(0) = 2.0 * err / n_rows;
            result.critic.net.backward(cache, g, critic_grads);
        }
        critic_opt.step(result.critic.net, critic_grads);
        soft_update(critic_target, result.critic.net, cfg.soft_target);

        // After the critic warm-up, the actor ascends the slow-moving target
        // critic through the chain.
        if (epoch >= cfg.warmup_epochs) {
            Mlp::Gradients actor_grads;
            actor_grads.setZero(result.denoiser.net);
            const double loss = actor_loss(result.denoiser, critic_target, result.schedule,
                                           batch, cfg.action_reg, &actor_grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_policy: non-finite actor loss at epoch " +
                                         std::to_string(epoch));
            actor_opt.step(result.denoiser.net, actor_grads);
        }
        if (!std::isfinite(critic_loss))
            throw std::runtime_error("train_policy: non-finite critic loss at epoch " +
                                     std::to_string(epoch));

        result.epochs_run = epoch + 1;
        if (cfg.plateau_window > 0 && epoch + 1 >= 2 * cfg.plateau_window) {
            const auto& rc = result.reward_curve;
            double recent = 0.0, previous = 0.0;
            for (int k = 0; k < cfg.plateau_window; ++k) {
                recent += rc[rc.size() - 1 - static_cast<std::size_t>(k)];
                previous += rc[rc.size() - 1 - static_cast<std::size_t>(k + cfg.plateau_window)];
            }
            if (std::abs(recent - previous) / cfg.plateau_window <
                cfg.plateau_tol * cfg.reward_scale)
                break;
        }
    }
    return result;
}

} // namespace policy
} // namespace csisim
