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

// Command-line front end: scenario simulation, pulse optimisation, agent
// training/evaluation, analytic control shifts and the sweep experiments.
// Every command reads one JSON config and writes CSV/JSON files into the
// output directory; identical config + seed reproduce identical bytes.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qmetro/harness.hpp"

namespace {

using namespace qmetro;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
    bool timings = false;

    HarnessContext context() const { return {seed, threads, timings}; }
};

nlohmann::json read_config(const GlobalOptions& opts) {
    if (opts.config_path.empty()) throw std::invalid_argument("missing --config");
    return load_json_file(opts.config_path);
}

std::ofstream open_output(const GlobalOptions& opts, const std::string& name) {
    std::filesystem::create_directories(opts.out_dir);
    const auto path = std::filesystem::path(opts.out_dir) / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const GlobalOptions& opts, const std::string& name, const nlohmann::json& j) {
    auto out = open_output(opts, name);
    out << j.dump(2) << '\n';
}

// Resolves "zero", a checkpoint rollout, or a pulse file into a pulse.
PulseSequence resolve_pulse(const nlohmann::json& config, const Scenario& scenario) {
    const std::string source = config.value("pulse", std::string("zero"));
    if (source == "zero")
        return PulseSequence::zero(scenario.channels(), scenario.horizon.steps, scenario.u_max);
    return pulse_from_json(load_json_file(source));
}

nlohmann::json evaluation_to_json(const Evaluation& ev) {
    nlohmann::json j;
    j["cr_bound"] = format_double(ev.bound);
    j["f0"] = format_double(ev.f0);
    nlohmann::json fisher = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fisher.push_back(ev.fisher.entries(r, c));
    j["cfim"] = std::move(fisher);
    j["divergent"] = ev.fisher.divergent;
    return j;
}

int cmd_simulate(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "pulse"}, "simulate config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const PulseSequence pulse = resolve_pulse(config, scenario);
    const Evaluation ev = evaluate(scenario, pulse);
    write_json(opts, "evaluation.json", evaluation_to_json(ev));
    std::cout << "cr_bound " << format_double(ev.bound) << " f0 " << format_double(ev.f0)
              << '\n';
    return 0;
}

int cmd_grape(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "grape", "initial"}, "grape config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const GrapeConfig grape_config =
        config.contains("grape") ? grape_config_from_json(config.at("grape")) : GrapeConfig{};

    PulseSequence initial =
        PulseSequence::zero(scenario.channels(), scenario.horizon.steps, scenario.u_max);
    const std::string init_mode = config.value("initial", std::string("default"));
    if (init_mode == "random" ||
        (init_mode == "default" && scenario.kind == ScenarioKind::example2)) {
        std::mt19937_64 gen(opts.seed);
        std::uniform_real_distribution<double> dist(-scenario.u_max, scenario.u_max);
        for (int i = 0; i < initial.channels(); ++i)
            for (int j = 0; j < initial.steps(); ++j) initial.amplitudes(i, j) = dist(gen);
    } else if (init_mode != "zero" && init_mode != "default") {
        initial = pulse_from_json(load_json_file(init_mode));
    }

    const GrapeReport report = grape_optimize(scenario, initial, grape_config);
    write_json(opts, "best_pulse.json", pulse_to_json(report.best_pulse));
    nlohmann::json j;
    j["best_f0"] = format_double(report.best_f0);
    j["best_cr_bound"] = format_double(report.best_bound);
    j["iterations"] = grape_config.iterations;
    j["wall_time_s"] = opts.timings ? report.wall_time_seconds : 0.0;
    j["seed"] = opts.seed;
    write_json(opts, "grape_report.json", j);

    auto history = open_output(opts, "grape_history.csv");
    history << "iteration,f0,cr_bound\n";
    for (std::size_t k = 0; k < report.history.size(); ++k)
        history << k << ',' << format_double(report.history[k].f0) << ','
                << format_double(report.history[k].bound) << '\n';
    std::cout << "best cr_bound " << format_double(report.best_bound) << '\n';
    return 0;
}

int cmd_train_rl(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "train"}, "train config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    TrainConfig train_config =
        config.contains("train") ? train_config_from_json(config.at("train")) : TrainConfig{};
    train_config.seed = opts.seed;

    const TrainResult result = train(scenario, train_config);
    write_json(opts, "actor.json", actor_checkpoint_to_json(result.actor, scenario, train_config));

    auto curve = open_output(opts, "learning_curve.csv");
    curve << "episode,terminal_reward,cr_bound\n";
    for (std::size_t e = 0; e < result.learning_curve.size(); ++e)
        curve << e << ',' << format_double(result.learning_curve[e].terminal_reward) << ','
              << format_double(result.learning_curve[e].bound) << '\n';
    for (const auto& note : result.diagnostics) std::cerr << note << '\n';
    std::cout << "trained " << result.learning_curve.size() << " episodes, "
              << result.aborted_episodes << " aborted\n";
    return 0;
}

int cmd_evaluate_rl(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "actor"}, "evaluate-rl config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const Mlp actor = actor_checkpoint_from_json(load_json_file(config.at("actor")));
    const auto [pulse, bound] = evaluate_policy(actor, scenario);
    write_json(opts, "policy_pulse.json", pulse_to_json(pulse));
    write_json(opts, "policy_eval.json", evaluation_to_json(evaluate(scenario, pulse)));
    std::cout << "cr_bound " << format_double(bound) << '\n';
    return 0;
}

int cmd_shift(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "x_prime", "pulse"}, "shift config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const auto xp = config.at("x_prime").get<std::vector<double>>();
    if (xp.size() != 3) throw std::invalid_argument("shift: x_prime needs 3 entries");
    const Eigen::Vector3d x_prime(xp[0], xp[1], xp[2]);
    const PulseSequence pulse = resolve_pulse(config, scenario);

    const GeneralizeReport report = generalize(scenario, scenario.params, x_prime, pulse);
    nlohmann::json j;
    j["feasible"] = report.feasible();
    j["residual_norm"] = report.decomposition.residual_norm;
    nlohmann::json coeffs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < report.decomposition.coefficients.size(); ++i)
        coeffs.push_back(report.decomposition.coefficients[i]);
    j["coefficients"] = std::move(coeffs);
    j["direct_cr_bound"] = format_double(report.direct_bound);
    j["predicted_cr_bound"] = format_double(report.predicted_bound);
    write_json(opts, "shift_report.json", j);
    if (report.feasible())
        write_json(opts, "shifted_pulse.json", pulse_to_json(report.shifted_pulse));
    std::cout << (report.feasible() ? "feasible" : "infeasible") << " residual "
              << format_double(report.decomposition.residual_norm) << '\n';
    return 0;
}

int cmd_sweep(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    const SweepSpec spec = sweep_spec_from_json(config);
    const std::vector<RunRecord> records = run_sweep(spec, opts.context());
    auto out = open_output(opts, "sweep.csv");
    write_sweep_csv(out, records);
    std::cout << records.size() << " rows\n";
    return 0;
}

int cmd_time_resolved(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "pulse", "actor"}, "time-resolved config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    PulseSequence pulse =
        PulseSequence::zero(scenario.channels(), scenario.horizon.steps, scenario.u_max);
    if (config.contains("actor")) {
        const Mlp actor = actor_checkpoint_from_json(load_json_file(config.at("actor")));
        pulse = evaluate_policy(actor, scenario).first;
    } else {
        pulse = resolve_pulse(config, scenario);
    }
    auto out = open_output(opts, "time_resolved.csv");
    write_time_resolved_csv(out, scenario, pulse);
    return 0;
}

int cmd_t_sweep(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config, {"scenario", "T_grid", "method", "grape", "actor"}, "t-sweep config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const std::vector<double> times = grid_from_json(config.at("T_grid"), "T_grid");
    const SweepMethod method = method_from_string(config.value("method", std::string("no-control")));
    const GrapeConfig grape_config =
        config.contains("grape") ? grape_config_from_json(config.at("grape")) : GrapeConfig{};
    const std::vector<TSweepRow> rows = run_t_sweep(
        scenario, times, method, grape_config, config.value("actor", std::string{}),
        opts.context());
    auto out = open_output(opts, "t_sweep.csv");
    write_t_sweep_csv(out, rows);
    return 0;
}

int cmd_adaptive(const GlobalOptions& opts) {
    const nlohmann::json config = read_config(opts);
    require_keys(config,
                 {"scenario", "true_params", "initial_guess", "method", "rounds", "grape",
                  "actor", "pulse"},
                 "adaptive config");
    const Scenario scenario = scenario_from_json(config.at("scenario"));
    const auto truth = config.at("true_params").get<std::vector<double>>();
    const auto guess = config.at("initial_guess").get<std::vector<double>>();
    if (truth.size() != 3 || guess.size() != 3)
        throw std::invalid_argument("adaptive: parameter vectors need 3 entries");
    const SweepMethod method = method_from_string(config.at("method").get<std::string>());
    const GrapeConfig grape_config =
        config.contains("grape") ? grape_config_from_json(config.at("grape")) : GrapeConfig{};
    const std::vector<AdaptiveRow> rows = adaptive_loop(
        scenario, {truth[0], truth[1], truth[2]}, {guess[0], guess[1], guess[2]}, method,
        config.value("rounds", 1), grape_config, config.value("actor", std::string{}),
        config.value("pulse", std::string{}), opts.context());
    auto out = open_output(opts, "adaptive.csv");
    write_adaptive_csv(out, rows, method, opts.seed);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-control toolkit for two-qubit multiparameter estimation"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "JSON config file")->required();
    app.add_option("--seed", opts.seed, "RNG seed (default 0)");
    app.add_option("--out", opts.out_dir, "output directory (default .)");
    app.add_option("--threads", opts.threads, "worker threads for sweeps (default 1)");
    app.add_flag("--timings", opts.timings,
                 "record wall times in outputs (breaks byte-reproducibility)");

    int (*handler)(const GlobalOptions&) = nullptr;
    app.add_subcommand("simulate", "evaluate a pulse on a scenario")
        ->callback([&] { handler = cmd_simulate; });
    app.add_subcommand("grape", "gradient-ascent pulse optimisation")
        ->callback([&] { handler = cmd_grape; });
    app.add_subcommand("train-rl", "train the deterministic-policy agent")
        ->callback([&] { handler = cmd_train_rl; });
    app.add_subcommand("evaluate-rl", "roll out a trained policy")
        ->callback([&] { handler = cmd_evaluate_rl; });
    app.add_subcommand("shift", "analytic control shift to new parameters")
        ->callback([&] { handler = cmd_shift; });
    app.add_subcommand("sweep", "parameter sweep over methods")
        ->callback([&] { handler = cmd_sweep; });
    app.add_subcommand("time-resolved", "CR bound at every time slice")
        ->callback([&] { handler = cmd_time_resolved; });
    app.add_subcommand("t-sweep", "normalised bound against the target time")
        ->callback([&] { handler = cmd_t_sweep; });
    app.add_subcommand("adaptive", "simulated adaptive estimation rounds")
        ->callback([&] { handler = cmd_adaptive; });

    CLI11_PARSE(app, argc, argv);
    try {
        return handler(opts);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
