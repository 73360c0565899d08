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

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qmetro/expm.hpp"
#include "qmetro/matrix.hpp"

namespace qmetro {

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

/// Pure dephasing at rate γ on one qubit: Γ[ρ] = γ/2 (σ_z ρ σ_z − ρ).
struct DephasingChannel {
    int qubit = 1;
    double rate = 0.0;
};

enum class ScenarioKind { example1, example2 };

inline std::string to_string(ScenarioKind kind) {
    return kind == ScenarioKind::example1 ? "example1" : "example2";
}

/// Discretised control horizon; steps * dt must equal the total time.
struct Horizon {
    double total_time = 5.0;
    double dt = 0.1;
    int steps = 50;
};

inline Horizon make_horizon(double total_time, double dt) {
    if (!(total_time > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("horizon: T and dt must be positive");
    const double ratio = total_time / dt;
    const int steps = static_cast<int>(std::llround(ratio));
    if (steps < 1 || std::abs(steps * dt - total_time) > 1e-9 * std::max(1.0, total_time))
        throw std::invalid_argument("horizon: T must be an integer multiple of dt");
    return Horizon{total_time, dt, steps};
}

/// Piecewise-constant control amplitudes, one row per channel, one column
/// per time slice.
struct PulseSequence {
    Eigen::MatrixXd amplitudes;  // P x N
    double u_max = 0.0;

    int channels() const { return static_cast<int>(amplitudes.rows()); }
    int steps() const { return static_cast<int>(amplitudes.cols()); }

    bool within_bounds(double slack = 0.0) const {
        return amplitudes.cwiseAbs().maxCoeff() <= u_max + slack;
    }

    static PulseSequence zero(int channels, int steps, double u_max) {
        return PulseSequence{Eigen::MatrixXd::Zero(channels, steps), u_max};
    }
};

/// Full statement of one estimation problem: free Hamiltonian family,
/// control channels, noise, probe, measurement and horizon.
struct Scenario {
    ScenarioKind kind = ScenarioKind::example1;
    Eigen::Vector3d params = Eigen::Vector3d::Zero();
    std::vector<DephasingChannel> noise;
    std::vector<PauliLabel> control_channels;
    CMatrix probe;
    std::vector<CMatrix> povm;
    Horizon horizon;
    double u_max = 0.0;
    bool restricted = false;

    int channels() const { return static_cast<int>(control_channels.size()); }
};

// ---------------------------------------------------------------------------
// The free Hamiltonian family and its parameter derivatives
// ---------------------------------------------------------------------------

inline CMatrix free_hamiltonian(ScenarioKind kind, const Eigen::Vector3d& x) {
    if (kind == ScenarioKind::example1) {
        const double b = x[0], theta = x[1], phi = x[2];
        return b * (std::sin(theta) * std::cos(phi) * pauli_embed({1, PauliAxis::x, 2}) +
                    std::sin(theta) * std::sin(phi) * pauli_embed({1, PauliAxis::y, 2}) +
                    std::cos(theta) * pauli_embed({1, PauliAxis::z, 2}));
    }
    const double w1 = x[0], w2 = x[1], g = x[2];
    const CMatrix z1 = pauli_embed({1, PauliAxis::z, 2});
    const CMatrix z2 = pauli_embed({2, PauliAxis::z, 2});
    return w1 * z1 + w2 * z2 + g * z1 * z2;
}

inline std::array<CMatrix, 3> free_hamiltonian_derivatives(ScenarioKind kind,
                                                           const Eigen::Vector3d& x) {
    const CMatrix x1 = pauli_embed({1, PauliAxis::x, 2});
    const CMatrix y1 = pauli_embed({1, PauliAxis::y, 2});
    const CMatrix z1 = pauli_embed({1, PauliAxis::z, 2});
    if (kind == ScenarioKind::example1) {
        const double b = x[0], theta = x[1], phi = x[2];
        const double st = std::sin(theta), ct = std::cos(theta);
        const double sp = std::sin(phi), cp = std::cos(phi);
        return {st * cp * x1 + st * sp * y1 + ct * z1,
                b * (ct * cp * x1 + ct * sp * y1 - st * z1),
                b * (-st * sp * x1 + st * cp * y1)};
    }
    const CMatrix z2 = pauli_embed({2, PauliAxis::z, 2});
    return {z1, z2, CMatrix(z1 * z2)};
}

// ---------------------------------------------------------------------------
// Materialised operators at a fixed parameter point
// ---------------------------------------------------------------------------

/// All operators the propagation and Fisher machinery needs, evaluated at one
/// parameter point.  Derived from a Scenario, but kept independent of it so
/// the same pipelines run on transformed (e.g. basis-rotated) operator sets.
struct ScenarioOps {
    CMatrix h0;
    std::array<CMatrix, 3> dh0;
    std::vector<CMatrix> controls;
    std::vector<std::pair<CMatrix, double>> lindblads;  // (jump operator, rate)
    CMatrix probe;
    std::vector<CMatrix> povm;
    Horizon horizon;
    double u_max = 0.0;

    int channels() const { return static_cast<int>(controls.size()); }
};

inline ScenarioOps materialize(const Scenario& s, const Eigen::Vector3d& x) {
    ScenarioOps ops;
    ops.h0 = free_hamiltonian(s.kind, x);
    ops.dh0 = free_hamiltonian_derivatives(s.kind, x);
    ops.controls.reserve(s.control_channels.size());
    for (const auto& label : s.control_channels)
        ops.controls.push_back(pauli_embed(label));
    for (const auto& channel : s.noise) {
        if (channel.rate < 0.0)
            throw std::invalid_argument("dephasing rate must be non-negative");
        ops.lindblads.emplace_back(pauli_embed({channel.qubit, PauliAxis::z, 2}), channel.rate);
    }
    ops.probe = s.probe;
    ops.povm = s.povm;
    ops.horizon = s.horizon;
    ops.u_max = s.u_max;
    return ops;
}

inline ScenarioOps materialize(const Scenario& s) { return materialize(s, s.params); }

// ---------------------------------------------------------------------------
// Liouvillian construction and propagation
// ---------------------------------------------------------------------------

inline CMatrix build_hamiltonian(const ScenarioOps& ops, const Eigen::VectorXd& pulse_column) {
    if (pulse_column.size() != ops.channels())
        throw std::invalid_argument("pulse column size does not match channel count");
    CMatrix h = ops.h0;
    for (int i = 0; i < ops.channels(); ++i)
        h += pulse_column[i] * ops.controls[i];
    return h;
}

/// Vectorised generator: L vec(ρ) = vec(−i[H,ρ] + Σ_k γ_k/2 (A_k ρ A_k − ρ)).
inline CMatrix build_liouvillian(const CMatrix& h,
                                 const std::vector<std::pair<CMatrix, double>>& lindblads) {
    if (hermiticity_defect(h) > 1e-10 * std::max(1.0, one_norm(h)))
        throw std::invalid_argument("build_liouvillian: Hamiltonian is not Hermitian");
    const auto n = h.rows();
    const CMatrix ident = CMatrix::Identity(n, n);
    CMatrix lv = -kImag * (kron(ident, h) - kron(h.transpose(), ident));
    for (const auto& [op, rate] : lindblads)
        lv += 0.5 * rate * (kron(op.transpose(), op) - CMatrix::Identity(n * n, n * n));
    return lv;
}

inline CMatrix build_liouvillian(const CMatrix& h, const std::vector<DephasingChannel>& noise) {
    std::vector<std::pair<CMatrix, double>> ops;
    for (const auto& channel : noise)
        ops.emplace_back(pauli_embed({channel.qubit, PauliAxis::z, 2}), channel.rate);
    return build_liouvillian(h, ops);
}

inline CMatrix slice_liouvillian(const ScenarioOps& ops, const Eigen::VectorXd& pulse_column) {
    return build_liouvillian(build_hamiltonian(ops, pulse_column), ops.lindblads);
}

// Parameter derivative of any slice Liouvillian; the noise part carries no
// parameter dependence, so only the commutator with ∂H0/∂x_α remains.
inline CMatrix liouvillian_direction(const CMatrix& dh) {
    const auto n = dh.rows();
    const CMatrix ident = CMatrix::Identity(n, n);
    return -kImag * (kron(ident, dh) - kron(dh.transpose(), ident));
}

/// Throws when ρ stops looking like a density matrix (numerical blow-up).
inline void check_density(const CMatrix& rho, double eig_floor = -1e-10) {
    if (!all_finite(rho))
        throw std::runtime_error("state has non-finite entries");
    if (hermiticity_defect(rho) > 1e-12)
        throw std::runtime_error("state drifted from Hermitian");
    if (std::abs(rho.trace() - complexd(1.0, 0.0)) > 1e-12)
        throw std::runtime_error("state trace drifted from 1");
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < eig_floor)
        throw std::runtime_error("state lost positivity beyond tolerance");
}

/// States ρ(0), ρ(Δt), ..., ρ(T) plus the per-slice propagators e^{Δt L_j},
/// cached for reuse by the Fisher and gradient machinery.
struct Trajectory {
    std::vector<CMatrix> states;
    std::vector<CMatrix> slice_propagators;
};

inline Trajectory propagate(const ScenarioOps& ops, const PulseSequence& pulse) {
    if (pulse.channels() != ops.channels() || pulse.steps() != ops.horizon.steps)
        throw std::invalid_argument("pulse shape does not match scenario");
    Trajectory traj;
    traj.states.reserve(ops.horizon.steps + 1);
    traj.slice_propagators.reserve(ops.horizon.steps);
    traj.states.push_back(ops.probe);
    CVector v = vec(ops.probe);
    for (int j = 0; j < ops.horizon.steps; ++j) {
        const CMatrix lv = slice_liouvillian(ops, pulse.amplitudes.col(j));
        const CMatrix prop = expm(ops.horizon.dt * lv);
        v = prop * v;
        CMatrix rho = unvec_square(v);
        check_density(rho);
        traj.slice_propagators.push_back(prop);
        traj.states.push_back(std::move(rho));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Scenario catalog
// ---------------------------------------------------------------------------

namespace detail {

inline CMatrix projector(const CVector& ket) { return ket * ket.adjoint(); }

inline std::vector<PauliLabel> local_channels(bool restricted) {
    if (restricted)
        return {{1, PauliAxis::x, 2}, {1, PauliAxis::y, 2},
                {2, PauliAxis::x, 2}, {2, PauliAxis::y, 2}};
    return {{1, PauliAxis::x, 2}, {1, PauliAxis::y, 2}, {1, PauliAxis::z, 2},
            {2, PauliAxis::x, 2}, {2, PauliAxis::y, 2}, {2, PauliAxis::z, 2}};
}

}  // namespace detail

/// One qubit in a magnetic field of unknown magnitude and direction,
/// x = (B, ϑ, φ), with an ancilla; dephasing on the field qubit; Bell-state
/// probe measured in the Bell basis; all six local controls.
inline Scenario make_example1(const Eigen::Vector3d& params, double gamma = 0.2,
                              double total_time = 5.0, double dt = 0.1, double u_max = 3.0) {
    if (params[0] < 0.0 || params[1] < 0.0 || params[1] > M_PI ||
        params[2] < 0.0 || params[2] >= 2.0 * M_PI)
        throw std::invalid_argument("example1: require B >= 0, theta in [0,pi], phi in [0,2pi)");
    Scenario s;
    s.kind = ScenarioKind::example1;
    s.params = params;
    s.noise = {{1, gamma}};
    s.control_channels = detail::local_channels(false);
    s.horizon = make_horizon(total_time, dt);
    s.u_max = u_max;

    CVector bell00(4), bell11(4), bell01(4), bell10(4);
    bell00 << 1, 0, 0, 1;   // (|00> + |11>)/sqrt2
    bell11 << 1, 0, 0, -1;  // (|00> - |11>)/sqrt2
    bell01 << 0, 1, 1, 0;   // (|01> + |10>)/sqrt2
    bell10 << 0, 1, -1, 0;  // (|01> - |10>)/sqrt2
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (auto* ket : {&bell00, &bell11, &bell01, &bell10}) *ket *= inv_sqrt2;

    s.probe = detail::projector(bell00);
    s.povm = {detail::projector(bell00), detail::projector(bell11),
              detail::projector(bell01), detail::projector(bell10)};
    return s;
}

/// ZZ-coupled pair with individual z fields, x = (ω₁, ω₂, g); dephasing on
/// both qubits; |++⟩ probe measured in the |±±⟩ basis.  The restricted flag
/// drops the z controls, leaving only σx and σy on each qubit.
inline Scenario make_example2(const Eigen::Vector3d& params, double gamma1 = 0.1,
                              double gamma2 = 0.1, double total_time = 5.0, double dt = 0.1,
                              double u_max = 5.0, bool restricted = false) {
    Scenario s;
    s.kind = ScenarioKind::example2;
    s.params = params;
    s.noise = {{1, gamma1}, {2, gamma2}};
    s.control_channels = detail::local_channels(restricted);
    s.horizon = make_horizon(total_time, dt);
    s.u_max = u_max;
    s.restricted = restricted;

    CVector plus(2), minus(2);
    plus << 1, 1;
    minus << 1, -1;
    plus /= std::sqrt(2.0);
    minus /= std::sqrt(2.0);
    auto kron_vec = [](const CVector& a, const CVector& b) {
        CVector out(a.size() * b.size());
        for (Eigen::Index i = 0; i < a.size(); ++i)
            out.segment(i * b.size(), b.size()) = a[i] * b;
        return out;
    };
    s.probe = detail::projector(kron_vec(plus, plus));
    s.povm = {detail::projector(kron_vec(plus, plus)), detail::projector(kron_vec(plus, minus)),
              detail::projector(kron_vec(minus, plus)),
              detail::projector(kron_vec(minus, minus))};
    return s;
}

/// Same catalog entry, different horizon, parameter point or rates.  The new
/// point is an evaluation input, not a declared scenario, so it may leave the
/// domain the factories validate (the published B' sweeps reach B' < 0).
inline Scenario rebuild_scenario(const Scenario& base, const Eigen::Vector3d& params,
                                 double total_time, const std::vector<double>& gammas) {
    Scenario s;
    if (base.kind == ScenarioKind::example1) {
        s = make_example1(base.params, gammas.at(0), total_time, base.horizon.dt, base.u_max);
    } else {
        s = make_example2(base.params, gammas.at(0), gammas.at(1), total_time, base.horizon.dt,
                          base.u_max, base.restricted);
    }
    s.params = params;
    return s;
}

inline Scenario rebuild_scenario_params(const Scenario& base, const Eigen::Vector3d& params) {
    std::vector<double> gammas;
    for (const auto& channel : base.noise) gammas.push_back(channel.rate);
    return rebuild_scenario(base, params, base.horizon.total_time, gammas);
}

// ---------------------------------------------------------------------------
// Serialisation (consumed by the experiment harness)
// ---------------------------------------------------------------------------

inline void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const auto& key : allowed)
            if (item.key() == key) { known = true; break; }
        if (!known)
            throw std::invalid_argument("unknown key '" + item.key() + "' in " + where);
    }
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["params"] = {s.params[0], s.params[1], s.params[2]};
    std::vector<double> gammas;
    for (const auto& channel : s.noise) gammas.push_back(channel.rate);
    j["gamma"] = gammas;
    j["T"] = s.horizon.total_time;
    j["dt"] = s.horizon.dt;
    j["u_max"] = s.u_max;
    j["restricted"] = s.restricted;
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    require_keys(j, {"kind", "params", "gamma", "T", "dt", "u_max", "restricted"}, "scenario");
    if (!j.contains("kind") || !j.contains("params"))
        throw std::invalid_argument("scenario: 'kind' and 'params' are required");
    const std::string kind = j.at("kind").get<std::string>();
    const auto p = j.at("params").get<std::vector<double>>();
    if (p.size() != 3)
        throw std::invalid_argument("scenario: 'params' must hold exactly 3 values");
    const Eigen::Vector3d params(p[0], p[1], p[2]);

    const bool restricted = j.value("restricted", false);
    if (kind == "example1") {
        if (restricted)
            throw std::invalid_argument("scenario: 'restricted' applies to example2 only");
        std::vector<double> gammas = j.value("gamma", std::vector<double>{0.2});
        if (gammas.size() != 1)
            throw std::invalid_argument("scenario: example1 takes one dephasing rate");
        return make_example1(params, gammas[0], j.value("T", 5.0), j.value("dt", 0.1),
                             j.value("u_max", 3.0));
    }
    if (kind == "example2") {
        std::vector<double> gammas = j.value("gamma", std::vector<double>{0.1, 0.1});
        if (gammas.size() == 1) gammas.push_back(gammas[0]);
        if (gammas.size() != 2)
            throw std::invalid_argument("scenario: example2 takes one or two dephasing rates");
        return make_example2(params, gammas[0], gammas[1], j.value("T", 5.0), j.value("dt", 0.1),
                             j.value("u_max", 5.0), restricted);
    }
    throw std::invalid_argument("scenario: unknown kind '" + kind + "'");
}

inline nlohmann::json pulse_to_json(const PulseSequence& pulse) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < pulse.channels(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < pulse.steps(); ++j) row.push_back(pulse.amplitudes(i, j));
        rows.push_back(std::move(row));
    }
    return nlohmann::json{{"u_max", pulse.u_max}, {"amplitudes", std::move(rows)}};
}

inline PulseSequence pulse_from_json(const nlohmann::json& j) {
    require_keys(j, {"u_max", "amplitudes"}, "pulse");
    const auto rows = j.at("amplitudes").get<std::vector<std::vector<double>>>();
    if (rows.empty())
        throw std::invalid_argument("pulse: empty amplitude grid");
    PulseSequence pulse;
    pulse.u_max = j.at("u_max").get<double>();
    pulse.amplitudes.resize(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw std::invalid_argument("pulse: ragged amplitude grid");
        for (size_t k = 0; k < rows[i].size(); ++k)
            pulse.amplitudes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                rows[i][k];
    }
    return pulse;
}

}  // namespace qmetro
