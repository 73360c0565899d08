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

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qmetro/ddpg.hpp"
#include "qmetro/grape.hpp"
#include "qmetro/shift.hpp"

namespace qmetro {

// Experiment runner: parameter sweeps over the published grids, time-resolved
// bound series, target-time sweeps and the simulated adaptive-estimation
// loop.  All outputs are CSV/JSON with fixed formatting; reruns with the same
// config and seed are byte-identical (timing columns are zeroed unless
// explicitly requested).

// ---------------------------------------------------------------------------
// Methods and axes
// ---------------------------------------------------------------------------

enum class SweepMethod { no_control, grape, rl_generalize, analytic_shift };

inline std::string to_string(SweepMethod m) {
    switch (m) {
        case SweepMethod::no_control: return "no-control";
        case SweepMethod::grape: return "grape";
        case SweepMethod::rl_generalize: return "rl-generalize";
        case SweepMethod::analytic_shift: return "analytic-shift";
    }
    throw std::logic_error("unreachable method");
}

inline SweepMethod method_from_string(const std::string& tag) {
    if (tag == "no-control") return SweepMethod::no_control;
    if (tag == "grape") return SweepMethod::grape;
    if (tag == "rl-generalize") return SweepMethod::rl_generalize;
    if (tag == "analytic-shift") return SweepMethod::analytic_shift;
    throw std::invalid_argument("unknown method '" + tag + "'");
}

enum class SweepAxis { b, direction, omega1, omega2, g, total_time, gamma };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::b: return "B";
        case SweepAxis::direction: return "direction";
        case SweepAxis::omega1: return "omega1";
        case SweepAxis::omega2: return "omega2";
        case SweepAxis::g: return "g";
        case SweepAxis::total_time: return "T";
        case SweepAxis::gamma: return "gamma";
    }
    throw std::logic_error("unreachable axis");
}

inline SweepAxis axis_from_string(const std::string& tag) {
    if (tag == "B") return SweepAxis::b;
    if (tag == "direction") return SweepAxis::direction;
    if (tag == "omega1") return SweepAxis::omega1;
    if (tag == "omega2") return SweepAxis::omega2;
    if (tag == "g") return SweepAxis::g;
    if (tag == "T") return SweepAxis::total_time;
    if (tag == "gamma") return SweepAxis::gamma;
    throw std::invalid_argument("unknown sweep axis '" + tag + "'");
}

// ---------------------------------------------------------------------------
// Specs and records
// ---------------------------------------------------------------------------

struct SweepPoint {
    std::string label;       // value column in the CSV
    Scenario scenario;       // fully resolved scenario at this grid point
    Eigen::Vector3d params;  // parameter point (equals scenario.params)
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::b;
    std::vector<double> grid;                      // 1-D axes
    std::vector<double> theta_grid, phi_grid;      // direction axis
    std::vector<SweepMethod> methods;
    Scenario base;
    std::string actor_path;   // trained policy checkpoint (rl-generalize)
    std::string pulse_path;   // optimal pulse at the base point (analytic-shift)
    GrapeConfig grape;        // settings for fresh grape reruns
};

struct RunRecord {
    std::string axis_value;
    SweepMethod method = SweepMethod::no_control;
    double cr_bound = kInfBound;
    double f0 = 0.0;
    bool feasible = true;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
};

struct HarnessContext {
    std::uint64_t seed = 0;
    int threads = 1;
    bool timings = false;  // off by default so reruns are byte-identical
};

// Worker RNG stream derived from (seed, grid index); independent of the
// thread that happens to run the point.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

inline std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

// ---------------------------------------------------------------------------
// Grid expansion
// ---------------------------------------------------------------------------

inline std::vector<double> expand_range(double min, double max, int count) {
    if (count < 2) throw std::invalid_argument("grid: ranged axes need count >= 2");
    std::vector<double> grid(count);
    for (int k = 0; k < count; ++k)
        grid[k] = min + (max - min) * double(k) / double(count - 1);
    return grid;
}

/// Published default grids: 41 points over the figure ranges, and the
/// 33 x 65 direction plane.
inline std::vector<double> default_grid(SweepAxis axis, const Scenario& base) {
    const double t = base.horizon.total_time;
    switch (axis) {
        case SweepAxis::b:
            return expand_range(base.params[0] - 2.0 * M_PI / t,
                                base.params[0] + 2.0 * M_PI / t, 41);
        case SweepAxis::omega1:
            return expand_range(base.params[0] - M_PI / t, base.params[0] + M_PI / t, 41);
        case SweepAxis::omega2:
            return expand_range(base.params[1] - M_PI / t, base.params[1] + M_PI / t, 41);
        case SweepAxis::g:
            return expand_range(base.params[2] - M_PI / t, base.params[2] + M_PI / t, 41);
        default:
            throw std::invalid_argument("no default grid for this axis");
    }
}

inline std::vector<SweepPoint> expand_points(const SweepSpec& spec) {
    std::vector<SweepPoint> points;
    std::vector<double> base_gammas;
    for (const auto& channel : spec.base.noise) base_gammas.push_back(channel.rate);

    auto push_params = [&](const std::string& label, const Eigen::Vector3d& params) {
        points.push_back(
            {label, rebuild_scenario(spec.base, params, spec.base.horizon.total_time, base_gammas),
             params});
    };

    switch (spec.axis) {
        case SweepAxis::b:
        case SweepAxis::omega1:
            for (double v : spec.grid)
                push_params(format_double(v), {v, spec.base.params[1], spec.base.params[2]});
            break;
        case SweepAxis::omega2:
            for (double v : spec.grid)
                push_params(format_double(v), {spec.base.params[0], v, spec.base.params[2]});
            break;
        case SweepAxis::g:
            for (double v : spec.grid)
                push_params(format_double(v), {spec.base.params[0], spec.base.params[1], v});
            break;
        case SweepAxis::direction:
            for (double theta : spec.theta_grid)
                for (double phi : spec.phi_grid)
                    push_params(format_double(theta) + ";" + format_double(phi),
                                {spec.base.params[0], theta, phi});
            break;
        case SweepAxis::total_time:
            for (double t : spec.grid) {
                points.push_back({format_double(t),
                                  rebuild_scenario(spec.base, spec.base.params, t, base_gammas),
                                  spec.base.params});
            }
            break;
        case SweepAxis::gamma:
            for (double gamma : spec.grid) {
                std::vector<double> gammas(base_gammas.size(), gamma);
                points.push_back(
                    {format_double(gamma),
                     rebuild_scenario(spec.base, spec.base.params,
                                      spec.base.horizon.total_time, gammas),
                     spec.base.params});
            }
            break;
    }
    return points;
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_parameter_axis(SweepAxis axis) {
    return axis != SweepAxis::total_time && axis != SweepAxis::gamma;
}

struct SweepArtifacts {
    Mlp actor;
    bool have_actor = false;
    PulseSequence base_pulse;
    bool have_pulse = false;
};

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& err) {
        throw std::invalid_argument("parse error in " + path + ": " + err.what());
    }
    return j;
}

inline SweepArtifacts load_artifacts(const SweepSpec& spec) {
    SweepArtifacts artifacts;
    for (SweepMethod m : spec.methods) {
        if (m == SweepMethod::rl_generalize && !artifacts.have_actor) {
            if (spec.actor_path.empty())
                throw std::invalid_argument("rl-generalize requires an actor checkpoint");
            artifacts.actor = actor_checkpoint_from_json(load_json_file(spec.actor_path));
            artifacts.have_actor = true;
        }
        if (m == SweepMethod::analytic_shift && !artifacts.have_pulse) {
            if (spec.pulse_path.empty())
                throw std::invalid_argument("analytic-shift requires a base pulse");
            artifacts.base_pulse = pulse_from_json(load_json_file(spec.pulse_path));
            artifacts.have_pulse = true;
        }
    }
    return artifacts;
}

inline PulseSequence grape_initial_pulse(const Scenario& s, std::mt19937_64& gen) {
    // Zero start for example 1, random start for example 2.
    if (s.kind == ScenarioKind::example1)
        return PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max);
    PulseSequence pulse = PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max);
    std::uniform_real_distribution<double> dist(-s.u_max, s.u_max);
    for (int i = 0; i < pulse.channels(); ++i)
        for (int j = 0; j < pulse.steps(); ++j) pulse.amplitudes(i, j) = dist(gen);
    return pulse;
}

inline RunRecord run_point(const SweepSpec& spec, const SweepPoint& point, SweepMethod method,
                           const SweepArtifacts& artifacts, const HarnessContext& ctx,
                           std::uint64_t index) {
    RunRecord record;
    record.axis_value = point.label;
    record.method = method;
    record.seed = ctx.seed;
    const auto t0 = std::chrono::steady_clock::now();
    switch (method) {
        case SweepMethod::no_control: {
            const Evaluation ev = evaluate(
                point.scenario, PulseSequence::zero(point.scenario.channels(),
                                                    point.scenario.horizon.steps,
                                                    point.scenario.u_max));
            record.cr_bound = ev.bound;
            record.f0 = ev.f0;
            break;
        }
        case SweepMethod::grape: {
            std::mt19937_64 gen = stream_rng(ctx.seed, index);
            const GrapeReport rep = grape_optimize(
                point.scenario, grape_initial_pulse(point.scenario, gen), spec.grape);
            record.cr_bound = rep.best_bound;
            record.f0 = rep.best_f0;
            break;
        }
        case SweepMethod::rl_generalize: {
            const auto [pulse, bound] = evaluate_policy(artifacts.actor, point.scenario);
            record.cr_bound = bound;
            record.f0 = evaluate(point.scenario, pulse).f0;
            break;
        }
        case SweepMethod::analytic_shift: {
            if (!is_parameter_axis(spec.axis))
                throw std::invalid_argument(
                    "analytic-shift applies to parameter axes only");
            const ShiftDecomposition dec =
                decompose_shift(spec.base, spec.base.params, point.params);
            if (!dec.feasible()) {
                record.feasible = false;
                record.cr_bound = kInfBound;
                record.f0 = 0.0;
                break;
            }
            const PulseSequence shifted = shift_pulse(artifacts.base_pulse, dec);
            const Evaluation ev = evaluate(point.scenario, shifted);
            record.cr_bound = ev.bound;
            record.f0 = ev.f0;
            break;
        }
    }
    record.wall_time_s =
        ctx.timings
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            : 0.0;
    return record;
}

}  // namespace detail

/// Every grid point under every requested method, in deterministic grid-major
/// order.  Points are dispatched to a small worker pool; each point owns an
/// RNG stream derived from (seed, index), so results do not depend on the
/// thread count.
inline std::vector<RunRecord> run_sweep(const SweepSpec& spec, const HarnessContext& ctx) {
    if (spec.methods.empty()) throw std::invalid_argument("sweep: no methods requested");
    const detail::SweepArtifacts artifacts = detail::load_artifacts(spec);
    const std::vector<SweepPoint> points = expand_points(spec);
    if (points.empty()) throw std::invalid_argument("sweep: empty grid");

    struct Task {
        std::size_t point;
        SweepMethod method;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (SweepMethod m : spec.methods) tasks.push_back({p, m});

    std::vector<RunRecord> records(tasks.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t k = cursor.fetch_add(1);
            if (k >= tasks.size() || failed.load()) break;
            try {
                records[k] = detail::run_point(spec, points[tasks[k].point], tasks[k].method,
                                               artifacts, ctx, tasks[k].point);
            } catch (const std::exception& err) {
                std::lock_guard<std::mutex> lock(error_mutex);
                error_message = err.what();
                failed.store(true);
            }
        }
    };
    const int threads = std::max(1, ctx.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error("sweep failed: " + error_message);
    return records;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << "axis_value,method,cr_bound,f0,feasible,wall_time_s,seed\n";
    for (const auto& r : records) {
        out << r.axis_value << ',' << to_string(r.method) << ',' << format_double(r.cr_bound)
            << ',' << format_double(r.f0) << ',' << (r.feasible ? "true" : "false") << ','
            << format_double(r.wall_time_s) << ',' << r.seed << '\n';
    }
}

// ---------------------------------------------------------------------------
// Time-resolved bound
// ---------------------------------------------------------------------------

inline void write_time_resolved_csv(std::ostream& out, const Scenario& scenario,
                                    const PulseSequence& pulse) {
    const Evaluation ev = evaluate(scenario, pulse);
    out << "t,cr_bound\n";
    for (std::size_t j = 0; j < ev.bound_series.size(); ++j)
        out << format_double(double(j) * scenario.horizon.dt) << ','
            << format_double(ev.bound_series[j]) << '\n';
}

// ---------------------------------------------------------------------------
// Target-time sweep
// ---------------------------------------------------------------------------

struct TSweepRow {
    double total_time = 0.0;
    double inverse_normalized_bound = 0.0;  // 1 / (T tr F⁻¹)
    double unitary_limit = 0.0;             // 4T/3 reference
};

inline std::vector<TSweepRow> run_t_sweep(const Scenario& base, const std::vector<double>& times,
                                          SweepMethod method, const GrapeConfig& grape_config,
                                          const std::string& actor_path,
                                          const HarnessContext& ctx) {
    if (method == SweepMethod::analytic_shift)
        throw std::invalid_argument("t-sweep: analytic-shift cannot change the horizon");
    Mlp actor;
    if (method == SweepMethod::rl_generalize)
        actor = actor_checkpoint_from_json(detail::load_json_file(actor_path));

    std::vector<double> gammas;
    for (const auto& channel : base.noise) gammas.push_back(channel.rate);
    std::vector<TSweepRow> rows;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const Scenario s = rebuild_scenario(base, base.params, times[k], gammas);
        double bound = kInfBound;
        if (method == SweepMethod::no_control) {
            bound = evaluate(s, PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max)).bound;
        } else if (method == SweepMethod::grape) {
            std::mt19937_64 gen = stream_rng(ctx.seed, k);
            bound = grape_optimize(s, detail::grape_initial_pulse(s, gen), grape_config).best_bound;
        } else {
            bound = evaluate_policy(actor, s).second;
        }
        rows.push_back({times[k], 1.0 / (times[k] * bound), 4.0 * times[k] / 3.0});
    }
    return rows;
}

inline void write_t_sweep_csv(std::ostream& out, const std::vector<TSweepRow>& rows) {
    out << "T,inv_normalized_bound,unitary_limit\n";
    for (const auto& r : rows)
        out << format_double(r.total_time) << ',' << format_double(r.inverse_normalized_bound)
            << ',' << format_double(r.unitary_limit) << '\n';
}

// ---------------------------------------------------------------------------
// Simulated adaptive estimation
// ---------------------------------------------------------------------------

struct AdaptiveRow {
    int round = 0;
    Eigen::Vector3d estimate = Eigen::Vector3d::Zero();
    double cr_bound = kInfBound;
    bool feasible = true;
    double wall_time_s = 0.0;
};

/// Each round designs a control for the current guess, evaluates its bound
/// there, and refreshes the guess from a normal centred at the true
/// parameters with per-axis spread sqrt([F⁻¹]_αα) — a stand-in estimator
/// for a single-shot measurement.
inline std::vector<AdaptiveRow> adaptive_loop(const Scenario& scenario,
                                              const Eigen::Vector3d& true_params,
                                              const Eigen::Vector3d& initial_guess,
                                              SweepMethod method, int rounds,
                                              const GrapeConfig& grape_config,
                                              const std::string& actor_path,
                                              const std::string& pulse_path,
                                              const HarnessContext& ctx) {
    if (rounds < 1) throw std::invalid_argument("adaptive: rounds must be >= 1");
    std::mt19937_64 gen(ctx.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Mlp actor;
    if (method == SweepMethod::rl_generalize)
        actor = actor_checkpoint_from_json(detail::load_json_file(actor_path));
    PulseSequence base_pulse;
    Eigen::Vector3d base_point = initial_guess;
    if (method == SweepMethod::analytic_shift) {
        if (!pulse_path.empty()) {
            base_pulse = pulse_from_json(detail::load_json_file(pulse_path));
        } else {
            // One full optimisation at the initial guess; later rounds reuse it.
            const Scenario at_guess = rebuild_scenario_params(scenario, initial_guess);
            base_pulse =
                grape_optimize(at_guess, detail::grape_initial_pulse(at_guess, gen), grape_config)
                    .best_pulse;
        }
    }

    std::vector<AdaptiveRow> rows;
    Eigen::Vector3d guess = initial_guess;
    for (int round = 0; round < rounds; ++round) {
        AdaptiveRow row;
        row.round = round;
        row.estimate = guess;
        const auto t0 = std::chrono::steady_clock::now();
        const Scenario at_guess = rebuild_scenario_params(scenario, guess);
        Eigen::Matrix3d fisher = Eigen::Matrix3d::Zero();
        double bound = kInfBound;
        if (method == SweepMethod::no_control) {
            const Evaluation ev = evaluate(
                at_guess,
                PulseSequence::zero(at_guess.channels(), at_guess.horizon.steps, at_guess.u_max));
            bound = ev.bound;
            fisher = ev.fisher.entries;
        } else if (method == SweepMethod::grape) {
            const GrapeReport rep = grape_optimize(
                at_guess, detail::grape_initial_pulse(at_guess, gen), grape_config);
            bound = rep.best_bound;
            fisher = evaluate(at_guess, rep.best_pulse).fisher.entries;
        } else if (method == SweepMethod::rl_generalize) {
            const auto [pulse, b] = evaluate_policy(actor, at_guess);
            bound = b;
            fisher = evaluate(at_guess, pulse).fisher.entries;
        } else {
            const ShiftDecomposition dec = decompose_shift(scenario, base_point, guess);
            if (!dec.feasible()) {
                row.feasible = false;
            } else {
                const Evaluation ev = evaluate(at_guess, shift_pulse(base_pulse, dec));
                bound = ev.bound;
                fisher = ev.fisher.entries;
            }
        }
        row.cr_bound = bound;
        row.wall_time_s =
            ctx.timings
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                : 0.0;
        rows.push_back(row);

        if (std::isfinite(bound)) {
            const Eigen::Matrix3d f_inv = fisher.inverse();
            for (int alpha = 0; alpha < 3; ++alpha) {
                const double variance = f_inv(alpha, alpha);
                const double sigma = variance > 0.0 ? std::sqrt(variance) : 0.0;
                guess[alpha] = true_params[alpha] + sigma * gauss(gen);
            }
        }
        // A divergent bound carries no information; the guess stays put.
    }
    return rows;
}

inline void write_adaptive_csv(std::ostream& out, const std::vector<AdaptiveRow>& rows,
                               SweepMethod method, std::uint64_t seed) {
    out << "round,method,est_0,est_1,est_2,cr_bound,feasible,wall_time_s,seed\n";
    for (const auto& r : rows) {
        out << r.round << ',' << to_string(method) << ',' << format_double(r.estimate[0]) << ','
            << format_double(r.estimate[1]) << ',' << format_double(r.estimate[2]) << ','
            << format_double(r.cr_bound) << ',' << (r.feasible ? "true" : "false") << ','
            << format_double(r.wall_time_s) << ',' << seed << '\n';
    }
}

// ---------------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------------

inline GrapeConfig grape_config_from_json(const nlohmann::json& j) {
    require_keys(j,
                 {"method", "learning_rate", "iterations", "adam_beta1", "adam_beta2", "adam_eps",
                  "clip_to_bounds"},
                 "grape config");
    GrapeConfig config;
    const std::string method = j.value("method", std::string("adam"));
    if (method == "gd") {
        config.method = GrapeMethod::gd;
    } else if (method == "adam") {
        config.method = GrapeMethod::adam;
    } else {
        throw std::invalid_argument("grape config: unknown method '" + method + "'");
    }
    config.learning_rate = j.value("learning_rate", 0.0);
    config.iterations = j.value("iterations", 200);
    config.adam_beta1 = j.value("adam_beta1", 0.9);
    config.adam_beta2 = j.value("adam_beta2", 0.999);
    config.adam_eps = j.value("adam_eps", 1e-8);
    config.clip_to_bounds = j.value("clip_to_bounds", true);
    return config;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    require_keys(j,
                 {"episodes", "replay_capacity", "batch_size", "discount", "actor_lr",
                  "critic_lr", "tau", "ou_theta", "ou_sigma_scale", "ou_anneal_fraction",
                  "actor_adam_eps", "critic_adam_eps",
                  "critic_weight_decay", "critic_final_init"},
                 "train config");
    TrainConfig config;
    config.episodes = j.value("episodes", 10000);
    config.replay_capacity = j.value("replay_capacity", 50000);
    config.batch_size = j.value("batch_size", 64);
    config.discount = j.value("discount", 0.99);
    if (!(config.discount >= 0.0 && config.discount < 1.0))
        throw std::invalid_argument("train config: discount must lie in [0, 1)");
    config.actor_lr = j.value("actor_lr", 1e-4);
    config.critic_lr = j.value("critic_lr", 1e-4);
    config.tau = j.value("tau", 1e-3);
    config.ou_theta = j.value("ou_theta", 0.15);
    config.ou_sigma_scale = j.value("ou_sigma_scale", 0.2);
    config.ou_anneal_fraction = j.value("ou_anneal_fraction", TrainConfig{}.ou_anneal_fraction);
    config.actor_adam_eps = j.value("actor_adam_eps", TrainConfig{}.actor_adam_eps);
    config.critic_adam_eps = j.value("critic_adam_eps", TrainConfig{}.critic_adam_eps);
    config.critic_weight_decay =
        j.value("critic_weight_decay", TrainConfig{}.critic_weight_decay);
    config.critic_final_init = j.value("critic_final_init", TrainConfig{}.critic_final_init);
    return config;
}

inline std::vector<double> grid_from_json(const nlohmann::json& j, const std::string& where) {
    if (j.is_array()) {
        const auto grid = j.get<std::vector<double>>();
        if (grid.empty()) throw std::invalid_argument(where + ": grid must be non-empty");
        return grid;
    }
    require_keys(j, {"min", "max", "count"}, where);
    return expand_range(j.at("min").get<double>(), j.at("max").get<double>(),
                        j.at("count").get<int>());
}

inline SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
    require_keys(j, {"scenario", "axis", "grid", "theta_grid", "phi_grid", "methods",
                     "artifacts", "grape"},
                 "sweep config");
    SweepSpec spec;
    spec.base = scenario_from_json(j.at("scenario"));
    spec.axis = axis_from_string(j.at("axis").get<std::string>());
    if (spec.axis == SweepAxis::direction) {
        spec.theta_grid = j.contains("theta_grid")
                              ? grid_from_json(j.at("theta_grid"), "theta_grid")
                              : expand_range(0.0, M_PI, 33);
        spec.phi_grid = j.contains("phi_grid") ? grid_from_json(j.at("phi_grid"), "phi_grid")
                                               : expand_range(0.0, 2.0 * M_PI, 65);
    } else if (j.contains("grid")) {
        spec.grid = grid_from_json(j.at("grid"), "grid");
    } else {
        spec.grid = default_grid(spec.axis, spec.base);
    }
    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
        throw std::invalid_argument("sweep config: 'methods' must be a non-empty array");
    for (const auto& tag : j.at("methods"))
        spec.methods.push_back(method_from_string(tag.get<std::string>()));
    if (j.contains("artifacts")) {
        require_keys(j.at("artifacts"), {"actor", "pulse"}, "artifacts");
        spec.actor_path = j.at("artifacts").value("actor", std::string{});
        spec.pulse_path = j.at("artifacts").value("pulse", std::string{});
    }
    if (j.contains("grape")) spec.grape = grape_config_from_json(j.at("grape"));
    return spec;
}

inline nlohmann::json load_json_file(const std::string& path) {
    return detail::load_json_file(path);
}

}  // namespace qmetro
