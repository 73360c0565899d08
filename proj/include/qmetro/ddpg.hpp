// Copyright 2026 The qmetro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <deque>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qmetro/fisher.hpp"
#include "qmetro/mlp.hpp"

namespace qmetro {

// Deterministic-policy actor-critic on the piecewise-constant control
// problem.  The agent observes the full density matrix, acts one control
// column per slice and is rewarded only at the target time by a steep
// function of the CR bound.

// ---------------------------------------------------------------------------
// Observation and reward
// ---------------------------------------------------------------------------

/// 32 reals: the 16 real parts of ρ in row-major order, then the 16
/// imaginary parts in the same order.
inline Eigen::VectorXd observe(const CMatrix& rho) {
    Eigen::VectorXd s(32);
    int idx = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s[idx++] = rho(i, j).real();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s[idx++] = rho(i, j).imag();
    return s;
}

/// 100 Σ_{n=1..4} 10^(−10ⁿ · tr F⁻¹); a divergent bound earns nothing.
inline double terminal_reward(double bound) {
    if (!std::isfinite(bound)) return 0.0;
    double r = 0.0;
    for (int n = 1; n <= 4; ++n) r += 100.0 * std::pow(10.0, -std::pow(10.0, n) * bound);
    return r;
}

/// Zero everywhere except the target step.
inline double reward(double bound_at_target, int step, int total_steps) {
    return step == total_steps ? terminal_reward(bound_at_target) : 0.0;
}

// ---------------------------------------------------------------------------
// Exploration noise
// ---------------------------------------------------------------------------

/// One Ornstein-Uhlenbeck process per action channel:
/// x ← x + θ(0 − x) + σ·N(0,1).
struct OuNoise {
    Eigen::VectorXd state;
    double theta = 0.15;
    double sigma = 0.2;

    OuNoise(int channels, double theta_in, double sigma_in)
        : state(Eigen::VectorXd::Zero(channels)), theta(theta_in), sigma(sigma_in) {}

    void reset() { state.setZero(); }

    const Eigen::VectorXd& step(std::mt19937_64& gen) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < state.size(); ++i)
            state[i] += theta * (0.0 - state[i]) + sigma * gauss(gen);
        return state;
    }
};

// ---------------------------------------------------------------------------
// Replay memory
// ---------------------------------------------------------------------------

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminal = false;
};

/// Fixed-capacity ring; the oldest sample is overwritten when full.
class ReplayMemory {
public:
    explicit ReplayMemory(size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("replay: capacity must be positive");
        buffer_.reserve(capacity_);
    }

    void push(Transition t) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back(std::move(t));
        } else {
            buffer_[write_] = std::move(t);
        }
        write_ = (write_ + 1) % capacity_;
    }

    size_t size() const { return buffer_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& operator[](size_t i) const { return buffer_[i]; }

    std::vector<size_t> sample_indices(std::mt19937_64& gen, size_t count) const {
        std::uniform_int_distribution<size_t> dist(0, buffer_.size() - 1);
        std::vector<size_t> out(count);
        for (auto& idx : out) idx = dist(gen);
        return out;
    }

private:
    size_t capacity_;
    size_t write_ = 0;
    std::vector<Transition> buffer_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int episodes = 10000;
    int replay_capacity = 50000;
    int batch_size = 64;
    double discount = 0.99;
    double actor_lr = 1e-4;
    double critic_lr = 1e-4;
    double tau = 1e-3;
    double ou_theta = 0.15;
    double ou_sigma_scale = 0.2;  // σ = scale · u_max
    // Fraction of the episode budget over which σ decays linearly to zero;
    // 0 keeps the noise constant throughout.
    double ou_anneal_fraction = 0.0;
    double actor_adam_eps = 1e-8;
    double critic_adam_eps = 1e-8;
    double critic_weight_decay = 0.0;
    double critic_final_init = 3e-3;  // init scale of the critic's last layer
    unsigned long long seed = 0;
};

struct EpisodeStats {
    double terminal_reward = 0.0;
    double bound = kInfBound;
};

struct TrainResult {
    Mlp actor;
    Mlp critic;
    std::vector<EpisodeStats> learning_curve;
    int aborted_episodes = 0;
    std::vector<std::string> diagnostics;
};

inline Mlp make_actor(int action_channels, double u_max) {
    return make_mlp({32, 400, 300, action_channels}, OutputActivation::tanh_scaled, u_max);
}

inline Mlp make_critic(int action_channels) {
    return make_mlp({32, 400, 300 + action_channels, 1}, OutputActivation::linear, 1.0, 1,
                    action_channels);
}

namespace detail {

// Rolls the sensitivity-carrying environment one slice forward.
struct EnvState {
    CVector v;
    std::array<CVector, 3> d;
    CMatrix rho;

    void reset(const ScenarioOps& ops) {
        v = vec(ops.probe);
        d = {CVector::Zero(16), CVector::Zero(16), CVector::Zero(16)};
        rho = ops.probe;
    }

    void step(const ScenarioOps& ops, const std::array<CMatrix, 3>& dirs,
              const Eigen::VectorXd& action) {
        const double dt = ops.horizon.dt;
        const CMatrix lv = slice_liouvillian(ops, action);
        const CMatrix prop = expm(dt * lv);
        for (int alpha = 0; alpha < 3; ++alpha)
            d[alpha] = prop * d[alpha] +
                       expm_frechet(dt * lv, dt * dirs[alpha]).second * v;
        v = prop * v;
        rho = unvec_square(v);
        check_density(rho);
    }

    double bound(const ScenarioOps& ops) const {
        const Cfim f = cfim(probabilities(rho, ops.povm),
                            probability_derivatives({unvec_square(d[0]), unvec_square(d[1]),
                                                     unvec_square(d[2])},
                                                    ops.povm));
        return cr_bound(f);
    }
};

struct Batch {
    Eigen::MatrixXd states, actions, next_states;
    Eigen::VectorXd rewards;
    std::vector<bool> terminal;
};

inline Batch gather(const ReplayMemory& replay, const std::vector<size_t>& indices,
                    int state_dim, int action_dim) {
    Batch batch;
    const auto n = static_cast<Eigen::Index>(indices.size());
    batch.states.resize(n, state_dim);
    batch.actions.resize(n, action_dim);
    batch.next_states.resize(n, state_dim);
    batch.rewards.resize(n);
    batch.terminal.resize(indices.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const Transition& t = replay[indices[static_cast<size_t>(k)]];
        batch.states.row(k) = t.state.transpose();
        batch.actions.row(k) = t.action.transpose();
        batch.next_states.row(k) = t.next_state.transpose();
        batch.rewards[k] = t.reward;
        batch.terminal[static_cast<size_t>(k)] = t.terminal;
    }
    return batch;
}

}  // namespace detail

/// Full DDPG loop: explore with OU noise, learn critic and actor from
/// uniformly sampled replay batches after every environment step, track
/// targets by soft updates.  Fully deterministic for a fixed seed.
inline TrainResult train(const Scenario& scenario, const TrainConfig& config) {
    const ScenarioOps ops = materialize(scenario);
    const std::array<CMatrix, 3> dirs = {liouvillian_direction(ops.dh0[0]),
                                         liouvillian_direction(ops.dh0[1]),
                                         liouvillian_direction(ops.dh0[2])};
    const int action_dim = ops.channels();
    std::mt19937_64 gen(config.seed);

    TrainResult result;
    result.actor = make_actor(action_dim, ops.u_max);
    result.critic = make_critic(action_dim);
    init_fan_in(result.actor, gen);
    init_fan_in(result.critic, gen, config.critic_final_init);
    Mlp actor_target = result.actor;
    Mlp critic_target = result.critic;
    AdamState actor_opt = make_adam_state(result.actor);
    AdamState critic_opt = make_adam_state(result.critic);

    ReplayMemory replay(static_cast<size_t>(config.replay_capacity));
    OuNoise noise(action_dim, config.ou_theta, config.ou_sigma_scale * ops.u_max);
    detail::EnvState env;

    for (int episode = 0; episode < config.episodes; ++episode) {
        env.reset(ops);
        noise.reset();
        if (config.ou_anneal_fraction > 0.0) {
            const double horizon = config.ou_anneal_fraction * config.episodes;
            noise.sigma = config.ou_sigma_scale * ops.u_max *
                          std::max(0.0, 1.0 - double(episode) / horizon);
        }
        EpisodeStats stats;
        bool aborted = false;
        for (int j = 0; j < ops.horizon.steps && !aborted; ++j) {
            const Eigen::VectorXd s = observe(env.rho);
            Eigen::VectorXd action = mlp_forward1(result.actor, s) + noise.step(gen);
            action = action.cwiseMax(-ops.u_max).cwiseMin(ops.u_max);
            try {
                env.step(ops, dirs, action);
            } catch (const std::runtime_error& err) {
                result.diagnostics.push_back("episode " + std::to_string(episode) +
                                             " aborted at step " + std::to_string(j) + ": " +
                                             err.what());
                ++result.aborted_episodes;
                aborted = true;
                break;
            }
            const bool terminal = (j + 1 == ops.horizon.steps);
            double r = 0.0;
            if (terminal) {
                stats.bound = env.bound(ops);
                r = terminal_reward(stats.bound);
                stats.terminal_reward = r;
            }
            replay.push({s, action, r, observe(env.rho), terminal});

            if (replay.size() >= static_cast<size_t>(config.batch_size)) {
                const detail::Batch batch = detail::gather(
                    replay, replay.sample_indices(gen, static_cast<size_t>(config.batch_size)),
                    32, action_dim);
                const Eigen::Index n = batch.states.rows();

                // Critic regression toward r + α_rl Q'(s', μ'(s')), zero at terminal.
                const Eigen::MatrixXd next_actions = mlp_forward(actor_target, batch.next_states);
                const Eigen::MatrixXd next_q =
                    mlp_forward(critic_target, batch.next_states, &next_actions);
                Eigen::VectorXd targets(n);
                for (Eigen::Index k = 0; k < n; ++k)
                    targets[k] =
                        batch.rewards[k] +
                        (batch.terminal[static_cast<size_t>(k)] ? 0.0
                                                                : config.discount * next_q(k, 0));
                ForwardTrace critic_trace =
                    mlp_forward_trace(result.critic, batch.states, &batch.actions);
                const Eigen::MatrixXd dq =
                    2.0 * (critic_trace.output.col(0) - targets) / double(n);
                MlpGradients critic_grads = mlp_backward(result.critic, critic_trace, dq);
                if (config.critic_weight_decay > 0.0)
                    for (int l = 0; l < result.critic.num_layers(); ++l)
                        critic_grads.dweights[l] +=
                            config.critic_weight_decay * result.critic.weights[l];
                adam_step(result.critic, critic_opt, critic_grads, config.critic_lr,
                          /*ascend=*/false, 0.9, 0.999, config.critic_adam_eps);

                // Actor ascends mean Q(s, μ(s)) through the critic's action input.
                ForwardTrace actor_trace = mlp_forward_trace(result.actor, batch.states);
                ForwardTrace q_trace =
                    mlp_forward_trace(result.critic, batch.states, &actor_trace.output);
                const Eigen::MatrixXd dmean =
                    Eigen::MatrixXd::Constant(n, 1, 1.0 / double(n));
                const MlpGradients through_critic =
                    mlp_backward(result.critic, q_trace, dmean, /*need_param_grads=*/false);
                adam_step(result.actor, actor_opt,
                          mlp_backward(result.actor, actor_trace, through_critic.dextra),
                          config.actor_lr, /*ascend=*/true, 0.9, 0.999, config.actor_adam_eps);

                soft_update(critic_target, result.critic, config.tau);
                soft_update(actor_target, result.actor, config.tau);
            }
        }
        result.learning_curve.push_back(stats);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Policy evaluation (the generalisation primitive)
// ---------------------------------------------------------------------------

/// Noise-free deterministic rollout of a trained actor at an arbitrary
/// parameter point; returns the induced pulse and its CR bound at T.
inline std::pair<PulseSequence, double> evaluate_policy(const Mlp& actor,
                                                        const Scenario& scenario) {
    const ScenarioOps ops = materialize(scenario);
    if (actor.output_size() != ops.channels())
        throw std::invalid_argument("evaluate_policy: actor width does not match scenario");
    PulseSequence pulse = PulseSequence::zero(ops.channels(), ops.horizon.steps, ops.u_max);
    CVector v = vec(ops.probe);
    for (int j = 0; j < ops.horizon.steps; ++j) {
        const Eigen::VectorXd action =
            mlp_forward1(actor, observe(unvec_square(v))).cwiseMax(-ops.u_max).cwiseMin(ops.u_max);
        pulse.amplitudes.col(j) = action;
        v = expm(ops.horizon.dt * slice_liouvillian(ops, action)) * v;
    }
    return {pulse, evaluate(ops, pulse).bound};
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::json actor_checkpoint_to_json(const Mlp& actor, const Scenario& scenario,
                                               const TrainConfig& config) {
    nlohmann::json j = mlp_to_json(actor);
    j["u_max"] = scenario.u_max;
    j["scenario_kind"] = to_string(scenario.kind);
    j["train"] = {{"episodes", config.episodes},
                  {"replay_capacity", config.replay_capacity},
                  {"batch_size", config.batch_size},
                  {"discount", config.discount},
                  {"actor_lr", config.actor_lr},
                  {"critic_lr", config.critic_lr},
                  {"tau", config.tau},
                  {"ou_theta", config.ou_theta},
                  {"ou_sigma_scale", config.ou_sigma_scale},
                  {"ou_anneal_fraction", config.ou_anneal_fraction},
                  {"actor_adam_eps", config.actor_adam_eps},
                  {"critic_adam_eps", config.critic_adam_eps},
                  {"critic_weight_decay", config.critic_weight_decay},
                  {"critic_final_init", config.critic_final_init}};
    j["seed"] = config.seed;
    return j;
}

inline Mlp actor_checkpoint_from_json(const nlohmann::json& j) { return mlp_from_json(j); }

}  // namespace qmetro
