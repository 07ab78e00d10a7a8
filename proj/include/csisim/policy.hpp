#pragma once

#include <functional>
#include <vector>

#include "csisim/mlp.hpp"
#include "csisim/pricing.hpp"

namespace csisim {
namespace policy {

// Noise schedule of the strategy diffusion chain. theta_bar(t) is the
// cumulative product prod_{i<=t} (1 - beta_i), with theta_bar(0) = 1.
struct BetaSchedule {
    std::vector<double> beta; // beta_1 .. beta_T

    static BetaSchedule linear(int steps, double beta_min = 1e-3, double beta_max = 0.2);

    int steps() const { return static_cast<int>(beta.size()); }
    double theta(int t) const;     // 1 - beta_t, t in [1, T]
    double theta_bar(int t) const; // t in [0, T]
    void validate() const;
};

using Action = Eigen::Vector2d;

// Closed-form forward marginal: s_t = sqrt(theta_bar_t) s_0 +
// sqrt(1 - theta_bar_t) z.
Action forward_sample(const Action& s0, int t, const BetaSchedule& schedule, Rng& rng);

struct PosteriorParams {
    Action mu;
    double beta_tilde = 0.0;
};

// mu = (s_t - beta_t * eps / sqrt(1 - theta_bar_t)) / sqrt(theta_t),
// beta_tilde = (1 - theta_bar_{t-1}) beta_t / (1 - theta_bar_t).
PosteriorParams posterior_params(const Action& s_t, const Action& eps_estimate, int t,
                                 const BetaSchedule& schedule);

// Denoising network eps(s_t, t, c); t enters as a one-hot embedding.
struct DenoiserNet {
    Mlp net;
    int steps = 0;
    int cond_dim = 0;

    DenoiserNet() = default;
    DenoiserNet(int steps, int cond_dim, int hidden, Rng& rng);
    Eigen::VectorXd assemble_input(const Action& s_t, int t, const Eigen::VectorXd& cond) const;
    Action eval(const Action& s_t, int t, const Eigen::VectorXd& cond) const;
};

// One reverse-chain step; the additive noise is suppressed at t = 1.
Action reverse_step(const Action& s_t, int t, const Eigen::VectorXd& cond,
                    const DenoiserNet& denoiser, const BetaSchedule& schedule, Rng& rng);

// Prices live in [0, v_r_max] x [0, i_b_max]; the raw chain output is
// squashed with tanh before the affine map, so gradients stay defined and
// outputs always land inside the box.
struct ActionBox {
    double v_r_max = 60.0;
    double i_b_max = 30.0;

    pricing::PricingStrategy to_prices(const Action& squashed) const;
    Action squash(const Action& raw) const { return raw.array().tanh(); }
};

// Full reverse chain from Gaussian noise; deterministic for a fixed seed.
pricing::PricingStrategy generate_strategy(const Eigen::VectorXd& cond, const DenoiserNet& denoiser,
                                           const BetaSchedule& schedule, const ActionBox& box,
                                           std::uint64_t seed);

// Documented fixed scaling of the environment into the condition vector.
Eigen::VectorXd encode_env(const pricing::EnvState& env);
int env_encoding_dim();

// Scenario distribution the policy trains against.
struct EnvDistribution {
    pricing::EnvState base;
    double v_c_min = 28.0, v_c_max = 32.0;
    double v_m_min = 38.0, v_m_max = 42.0;
    double u_th_min = 2500.0, u_th_max = 3200.0;
    double map_jitter = 0.05; // relative jitter on the curve 'a' parameters

    pricing::EnvState sample(Rng& rng) const;
};

struct TrainConfig {
    int diffusion_steps = 10;
    double beta_min = 1e-3, beta_max = 0.2;
    int epochs = 3000;
    int batch = 512;
    double actor_lr = 1e-5;   // paper default; bundled scenarios override
    double critic_lr = 1e-5;
    double soft_target = 0.005;
    double discount = 0.95;   // recorded; the game is single-round
    double explore_noise = 0.01;
    int hidden = 64;
    double reward_scale = 1000.0;
    double penalty = 0.3;     // added (normalized) when the threshold is violated
    // The exploration process of the training loop: a slice of each batch is
    // scored at uniformly random actions so the critic stays informed off
    // the current policy, and the first epochs train the critic alone.
    double coverage_fraction = 0.25;
    int warmup_epochs = 50;
    // Penalty on the pre-squash action norm; keeps the tanh out of its
    // saturated (zero-gradient) region.
    double action_reg = 0.01;
    // Both learning rates decay linearly to this fraction by the last epoch
    // (1.0 disables the decay).
    double lr_decay_floor = 1.0;
    int plateau_window = 0;   // 0: run all epochs
    double plateau_tol = 1e-4;
};

struct CriticNet {
    Mlp net;
};

struct TrainResult {
    DenoiserNet denoiser;
    CriticNet critic;
    BetaSchedule schedule;
    ActionBox box;
    std::vector<double> reward_curve; // mean raw reward per epoch
    int epochs_run = 0;
};

using EnvSampler = std::function<pricing::EnvState(Rng&)>;

// Algorithm: per epoch draw a batch of environments, denoise a strategy for
// each (plus exploration noise), score it against the exact best-response
// game, regress the critic on the observed rewards, and ascend the critic
// through the chain. Throws on non-finite losses.
TrainResult train_policy(const EnvSampler& sampler, const pricing::PricingGrid& grid,
                         const TrainConfig& cfg, std::uint64_t seed);

// Reward seen by the policy: U_us when the participation constraint holds,
// else the (negative) shortfall minus a penalty.
double strategy_reward(const pricing::PricingStrategy& s, const pricing::EnvState& env,
                       double penalty_raw);

// Deterministic loss/gradient of the actor objective on a fixed batch;
// exposed so an independent finite-difference probe can check the analytic
// gradient.
struct ActorBatch {
    std::vector<Eigen::VectorXd> conds;
    std::vector<std::vector<Action>> chain_noise; // per sample, per step t=T..2
    std::vector<Action> terminal;                 // s_T draws
    std::vector<Action> explore;                  // additive exploration noise
};

ActorBatch make_actor_batch(const std::vector<Eigen::VectorXd>& conds, int steps, Rng& rng,
                            double explore_noise);

double actor_loss(const DenoiserNet& denoiser, const Mlp& critic, const BetaSchedule& schedule,
                  const ActorBatch& batch, double action_reg, Mlp::Gradients* grads);

} // namespace policy
} // namespace csisim
