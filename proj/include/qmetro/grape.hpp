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

#include <chrono>
#include <random>
#include <vector>

#include "qmetro/fisher.hpp"

namespace qmetro {

// ---------------------------------------------------------------------------
// Exact gradient of the diagonal Fisher entries with respect to every control
// amplitude.  Control i at slice j enters only that slice's exponential, so
// its derivative is one Fréchet direction there; the mixed parameter/control
// derivative needs the second Fréchet derivative on the shared slice plus
// chain terms through the cached propagators.
// ---------------------------------------------------------------------------

struct CfimDiagonalGradient {
    Cfim fisher;                          // at the target time
    std::array<Eigen::MatrixXd, 3> dfisher_diag;  // d F_αα / d u_ij, each P x N
};

inline CfimDiagonalGradient cfim_diagonal_gradient(const ScenarioOps& ops,
                                                   const PulseSequence& pulse) {
    const int num_steps = ops.horizon.steps;
    const int num_channels = ops.channels();
    const int num_outcomes = static_cast<int>(ops.povm.size());
    const double dt = ops.horizon.dt;

    const std::array<CMatrix, 3> param_dirs = {liouvillian_direction(ops.dh0[0]),
                                               liouvillian_direction(ops.dh0[1]),
                                               liouvillian_direction(ops.dh0[2])};
    std::vector<CMatrix> control_dirs;
    control_dirs.reserve(num_channels);
    for (const auto& h : ops.controls) control_dirs.push_back(liouvillian_direction(h));

    // Forward pass: states, sensitivities, slice generators, propagators and
    // the per-slice parameter Fréchet blocks (reused by the backward pass).
    std::vector<CMatrix> slice_lv(num_steps);
    std::vector<CMatrix> props(num_steps);
    std::vector<std::array<CMatrix, 3>> param_frechet(num_steps);
    std::vector<CVector> v(num_steps + 1);
    std::vector<std::array<CVector, 3>> d(num_steps + 1);
    v[0] = vec(ops.probe);
    d[0] = {CVector::Zero(16), CVector::Zero(16), CVector::Zero(16)};
    for (int j = 0; j < num_steps; ++j) {
        slice_lv[j] = slice_liouvillian(ops, pulse.amplitudes.col(j));
        props[j] = expm(dt * slice_lv[j]);
        for (int alpha = 0; alpha < 3; ++alpha) {
            param_frechet[j][alpha] =
                expm_frechet(dt * slice_lv[j], dt * param_dirs[alpha]).second;
            d[j + 1][alpha] = props[j] * d[j][alpha] + param_frechet[j][alpha] * v[j];
        }
        v[j + 1] = props[j] * v[j];
    }

    // Backward pass: adjoint rows a(y,j) = w_y† E_{N-1}...E_j and their
    // parameter derivatives b(y,alpha,j).
    using RowVec = Eigen::Matrix<complexd, 1, Eigen::Dynamic>;
    std::vector<std::vector<RowVec>> a(num_outcomes, std::vector<RowVec>(num_steps + 1));
    std::vector<std::vector<std::array<RowVec, 3>>> b(
        num_outcomes, std::vector<std::array<RowVec, 3>>(num_steps + 1));
    for (int y = 0; y < num_outcomes; ++y) {
        a[y][num_steps] = vec(ops.povm[y]).adjoint();
        for (int alpha = 0; alpha < 3; ++alpha)
            b[y][num_steps][alpha] = RowVec::Zero(16);
        for (int j = num_steps - 1; j >= 0; --j) {
            a[y][j] = a[y][j + 1] * props[j];
            for (int alpha = 0; alpha < 3; ++alpha)
                b[y][j][alpha] =
                    b[y][j + 1][alpha] * props[j] + a[y][j + 1] * param_frechet[j][alpha];
        }
    }

    // Final-time statistics.
    Eigen::VectorXd probs(num_outcomes);
    Eigen::MatrixXd dprobs(3, num_outcomes);
    for (int y = 0; y < num_outcomes; ++y) {
        probs[y] = (a[y][num_steps] * v[num_steps]).value().real();
        for (int alpha = 0; alpha < 3; ++alpha)
            dprobs(alpha, y) = (a[y][num_steps] * d[num_steps][alpha]).value().real();
    }

    CfimDiagonalGradient out;
    out.fisher = cfim(probs, dprobs);
    for (auto& grid : out.dfisher_diag) grid = Eigen::MatrixXd::Zero(num_channels, num_steps);

    for (int j = 0; j < num_steps; ++j) {
        for (int i = 0; i < num_channels; ++i) {
            const CMatrix ctrl_frechet =
                expm_frechet(dt * slice_lv[j], dt * control_dirs[i]).second;
            const CVector shifted_state = ctrl_frechet * v[j];
            std::array<CVector, 3> shifted_sens;
            for (int alpha = 0; alpha < 3; ++alpha) {
                const CMatrix mixed =
                    expm_frechet2(dt * slice_lv[j], dt * control_dirs[i], dt * param_dirs[alpha]);
                shifted_sens[alpha] = mixed * v[j] + ctrl_frechet * d[j][alpha];
            }
            for (int y = 0; y < num_outcomes; ++y) {
                if (probs[y] < kProbFloor) continue;
                const double dp_du = (a[y][j + 1] * shifted_state).value().real();
                for (int alpha = 0; alpha < 3; ++alpha) {
                    const double ddp_du =
                        ((b[y][j + 1][alpha] * shifted_state).value() +
                         (a[y][j + 1] * shifted_sens[alpha]).value())
                            .real();
                    const double ratio = dprobs(alpha, y) / probs[y];
                    out.dfisher_diag[alpha](i, j) += 2.0 * ratio * ddp_du - ratio * ratio * dp_du;
                }
            }
        }
    }
    return out;
}

/// Gradient of f₀ with respect to every control amplitude, P x N.
inline Eigen::MatrixXd grape_gradient(const ScenarioOps& ops, const PulseSequence& pulse) {
    const CfimDiagonalGradient g = cfim_diagonal_gradient(ops, pulse);
    const double f0 = f0_objective(g.fisher);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(ops.channels(), ops.horizon.steps);
    if (f0 <= 0.0) return grad;  // objective pinned at zero, nothing to ascend
    for (int alpha = 0; alpha < 3; ++alpha) {
        const double diag = g.fisher.entries(alpha, alpha);
        grad += g.dfisher_diag[alpha] / (diag * diag);
    }
    return f0 * f0 * grad;
}

inline Eigen::MatrixXd grape_gradient(const Scenario& s, const PulseSequence& pulse) {
    return grape_gradient(materialize(s), pulse);
}

// ---------------------------------------------------------------------------
// Ascent loops
// ---------------------------------------------------------------------------

enum class GrapeMethod { gd, adam };

struct GrapeConfig {
    GrapeMethod method = GrapeMethod::adam;
    double learning_rate = 0.0;  // 0 resolves to the method default
    int iterations = 200;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool clip_to_bounds = true;

    double resolved_learning_rate() const {
        if (learning_rate > 0.0) return learning_rate;
        return method == GrapeMethod::gd ? 0.01 : 0.005;
    }
};

struct GrapeIterate {
    double f0 = 0.0;
    double bound = kInfBound;
};

struct GrapeReport {
    PulseSequence best_pulse;
    double best_f0 = 0.0;
    double best_bound = kInfBound;
    std::vector<GrapeIterate> history;  // entry 0 is the initial pulse
    double wall_time_seconds = 0.0;
};

inline GrapeReport grape_optimize(const ScenarioOps& ops, const PulseSequence& initial,
                                  const GrapeConfig& config) {
    if (!(config.iterations >= 0))
        throw std::invalid_argument("grape: iterations must be non-negative");
    const auto t_start = std::chrono::steady_clock::now();
    const double lr = config.resolved_learning_rate();

    GrapeReport report;
    PulseSequence pulse = initial;
    auto record = [&](const PulseSequence& candidate) {
        const Evaluation ev = evaluate(ops, candidate);
        report.history.push_back({ev.f0, ev.bound});
        if (report.history.size() == 1 || ev.f0 > report.best_f0) {
            report.best_pulse = candidate;
            report.best_f0 = ev.f0;
            report.best_bound = ev.bound;
        }
    };
    record(pulse);

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(pulse.channels(), pulse.steps());
    Eigen::MatrixXd s = m;
    for (int it = 1; it <= config.iterations; ++it) {
        const Eigen::MatrixXd grad = grape_gradient(ops, pulse);
        if (config.method == GrapeMethod::gd) {
            pulse.amplitudes += lr * grad;
        } else {
            m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
            s = config.adam_beta2 * s + (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(config.adam_beta1, it);
            const double c2 = 1.0 - std::pow(config.adam_beta2, it);
            pulse.amplitudes.array() +=
                lr * (m.array() / c1) / ((s.array() / c2).sqrt() + config.adam_eps);
        }
        if (config.clip_to_bounds)
            pulse.amplitudes = pulse.amplitudes.cwiseMax(-pulse.u_max).cwiseMin(pulse.u_max);
        record(pulse);
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

inline GrapeReport grape_optimize(const Scenario& s, const PulseSequence& initial,
                                  const GrapeConfig& config) {
    return grape_optimize(materialize(s), initial, config);
}

/// Uniformly random bounded pulse, the standard initial guess for example 2.
inline PulseSequence random_pulse(const Scenario& s, unsigned long long seed,
                                  double fraction = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-fraction * s.u_max, fraction * s.u_max);
    PulseSequence pulse = PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max);
    for (int i = 0; i < pulse.channels(); ++i)
        for (int j = 0; j < pulse.steps(); ++j) pulse.amplitudes(i, j) = dist(gen);
    return pulse;
}

}  // namespace qmetro
