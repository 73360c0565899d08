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
#include <limits>
#include <vector>

#include "qmetro/dynamics.hpp"

namespace qmetro {

inline constexpr double kInfBound = std::numeric_limits<double>::infinity();

// Outcomes with probability below this floor are dropped from the Fisher
// sums; if such an outcome still carries a non-vanishing derivative the
// matrix is flagged and the bound reported as divergent.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kDivergenceRatio = 1e12;

// Condition-number cap for inverting the Fisher matrix.
inline constexpr double kConditionCap = 1e12;

/// Classical Fisher information matrix over the three estimated parameters.
struct Cfim {
    Eigen::Matrix3d entries = Eigen::Matrix3d::Zero();
    bool divergent = false;
};

// ---------------------------------------------------------------------------
// Measurement statistics
// ---------------------------------------------------------------------------

inline Eigen::VectorXd probabilities(const CMatrix& state, const std::vector<CMatrix>& povm) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(povm.size()));
    for (size_t y = 0; y < povm.size(); ++y)
        p[static_cast<Eigen::Index>(y)] = (state * povm[y]).trace().real();
    return p;
}

inline Eigen::MatrixXd probability_derivatives(const std::array<CMatrix, 3>& state_derivs,
                                               const std::vector<CMatrix>& povm) {
    Eigen::MatrixXd dp(3, static_cast<Eigen::Index>(povm.size()));
    for (int alpha = 0; alpha < 3; ++alpha)
        for (size_t y = 0; y < povm.size(); ++y)
            dp(alpha, static_cast<Eigen::Index>(y)) =
                (state_derivs[alpha] * povm[y]).trace().real();
    return dp;
}

/// F_αβ = Σ_y ∂_α p_y ∂_β p_y / p_y over the outcomes above the floor.
inline Cfim cfim(const Eigen::VectorXd& probs, const Eigen::MatrixXd& dprobs) {
    Cfim f;
    for (Eigen::Index y = 0; y < probs.size(); ++y) {
        const double p = probs[y];
        if (p < kProbFloor) {
            for (int alpha = 0; alpha < 3; ++alpha) {
                const double d2 = dprobs(alpha, y) * dprobs(alpha, y);
                if (d2 > kDivergenceRatio * std::max(p, 1e-300)) f.divergent = true;
            }
            continue;
        }
        f.entries += dprobs.col(y) * dprobs.col(y).transpose() / p;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Figures of merit
// ---------------------------------------------------------------------------

/// tr F⁻¹, or +inf when F is singular, too ill-conditioned to trust, or was
/// flagged divergent while accumulating outcomes.
inline double cr_bound(const Cfim& f) {
    if (f.divergent) return kInfBound;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(f.entries, Eigen::EigenvaluesOnly);
    const auto& lambda = eig.eigenvalues();
    if (lambda.minCoeff() <= 0.0 || lambda.maxCoeff() / lambda.minCoeff() > kConditionCap)
        return kInfBound;
    return (1.0 / lambda.array()).sum();
}

/// Surrogate objective f₀ = (Σ_α 1/F_αα)⁻¹; zero when any diagonal entry is
/// non-positive.  Its reciprocal lower-bounds tr F⁻¹.
inline double f0_objective(const Cfim& f) {
    double inv_sum = 0.0;
    for (int alpha = 0; alpha < 3; ++alpha) {
        const double d = f.entries(alpha, alpha);
        if (d <= 0.0) return 0.0;
        inv_sum += 1.0 / d;
    }
    return 1.0 / inv_sum;
}

// ---------------------------------------------------------------------------
// Parameter sensitivity of the evolved state
// ---------------------------------------------------------------------------

/// The paper-style derivative treats the propagator derivative to first order
/// in Δt; the exact mode uses the Fréchet derivative of each slice
/// exponential instead, which is what the gradient tests are built on.
enum class SensitivityMode { exact, first_order };

/// Evolved states with their parameter derivatives at every slice.
struct SensitivityRecord {
    std::vector<CMatrix> states;                    // N+1 entries
    std::vector<std::array<CMatrix, 3>> derivs;     // N+1 entries of ∂ρ/∂x_α
    std::vector<CMatrix> slice_propagators;         // N cached e^{Δt L_j}

    const CMatrix& final_state() const { return states.back(); }
    const std::array<CMatrix, 3>& final_derivs() const { return derivs.back(); }
};

inline SensitivityRecord propagate_with_sensitivity(const ScenarioOps& ops,
                                                    const PulseSequence& pulse,
                                                    SensitivityMode mode = SensitivityMode::exact) {
    if (pulse.channels() != ops.channels() || pulse.steps() != ops.horizon.steps)
        throw std::invalid_argument("pulse shape does not match scenario");
    const double dt = ops.horizon.dt;
    const std::array<CMatrix, 3> directions = {liouvillian_direction(ops.dh0[0]),
                                               liouvillian_direction(ops.dh0[1]),
                                               liouvillian_direction(ops.dh0[2])};
    SensitivityRecord rec;
    rec.states.push_back(ops.probe);
    rec.derivs.push_back({CMatrix::Zero(4, 4), CMatrix::Zero(4, 4), CMatrix::Zero(4, 4)});

    CVector v = vec(ops.probe);
    std::array<CVector, 3> d = {CVector::Zero(16), CVector::Zero(16), CVector::Zero(16)};
    for (int j = 0; j < ops.horizon.steps; ++j) {
        const CMatrix lv = slice_liouvillian(ops, pulse.amplitudes.col(j));
        const CMatrix prop = expm(dt * lv);
        std::array<CVector, 3> d_next;
        for (int alpha = 0; alpha < 3; ++alpha) {
            if (mode == SensitivityMode::exact) {
                const CMatrix frechet = expm_frechet(dt * lv, dt * directions[alpha]).second;
                d_next[alpha] = prop * d[alpha] + frechet * v;
            } else {
                d_next[alpha] = prop * (d[alpha] + dt * (directions[alpha] * v));
            }
        }
        v = prop * v;
        d = std::move(d_next);
        CMatrix rho = unvec_square(v);
        check_density(rho);
        rec.states.push_back(std::move(rho));
        rec.derivs.push_back({unvec_square(d[0]), unvec_square(d[1]), unvec_square(d[2])});
        rec.slice_propagators.push_back(prop);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// End-to-end evaluation of a pulse
// ---------------------------------------------------------------------------

struct Evaluation {
    Cfim fisher;                    // at the target time
    double bound = kInfBound;       // tr F⁻¹ at the target time
    double f0 = 0.0;                // surrogate objective at the target time
    std::vector<double> bound_series;  // tr F⁻¹ at every slice, t = 0 ... T
    SensitivityRecord record;
};

inline Evaluation evaluate(const ScenarioOps& ops, const PulseSequence& pulse,
                           SensitivityMode mode = SensitivityMode::exact) {
    Evaluation out;
    out.record = propagate_with_sensitivity(ops, pulse, mode);
    out.bound_series.reserve(out.record.states.size());
    for (size_t j = 0; j < out.record.states.size(); ++j) {
        const Cfim f = cfim(probabilities(out.record.states[j], ops.povm),
                            probability_derivatives(out.record.derivs[j], ops.povm));
        out.bound_series.push_back(cr_bound(f));
        if (j + 1 == out.record.states.size()) {
            out.fisher = f;
            out.bound = out.bound_series.back();
            out.f0 = f0_objective(f);
        }
    }
    return out;
}

inline Evaluation evaluate(const Scenario& s, const PulseSequence& pulse,
                           SensitivityMode mode = SensitivityMode::exact) {
    return evaluate(materialize(s), pulse, mode);
}

}  // namespace qmetro
