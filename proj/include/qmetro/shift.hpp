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

#include <optional>

#include "qmetro/fisher.hpp"

namespace qmetro {

// A shift of the free Hamiltonian that lies in the span of the control
// channels can be cancelled exactly by offsetting the pulse, keeping the
// whole state trajectory (and with it the optimality of the control) intact
// at the new parameter point.  The machinery below decomposes shifts, applies
// them and predicts the transformed CR bound without re-optimisation.

inline constexpr double kFeasibilityResidual = 1e-10;
inline constexpr double kPoleGuard = 1e-8;

// ---------------------------------------------------------------------------
// Shift decomposition over the control channels
// ---------------------------------------------------------------------------

struct ShiftDecomposition {
    Eigen::VectorXd coefficients;  // one per control channel
    double residual_norm = 0.0;

    bool feasible() const { return residual_norm <= kFeasibilityResidual; }
};

/// Least-squares projection of δH = H0(x') − H0(x) onto span{H_i} in the
/// Frobenius inner product.  Infeasibility (a non-zero residual) is data,
/// not an error.
inline ShiftDecomposition decompose_shift(const Scenario& s, const Eigen::Vector3d& x,
                                          const Eigen::Vector3d& x_prime) {
    const CMatrix delta_h = free_hamiltonian(s.kind, x_prime) - free_hamiltonian(s.kind, x);
    const int num_channels = s.channels();
    std::vector<CMatrix> channels;
    channels.reserve(num_channels);
    for (const auto& label : s.control_channels) channels.push_back(pauli_embed(label));

    Eigen::MatrixXd gram(num_channels, num_channels);
    Eigen::VectorXd rhs(num_channels);
    for (int i = 0; i < num_channels; ++i) {
        for (int k = 0; k < num_channels; ++k)
            gram(i, k) = (channels[i].adjoint() * channels[k]).trace().real();
        rhs[i] = (channels[i].adjoint() * delta_h).trace().real();
    }
    ShiftDecomposition dec;
    dec.coefficients = gram.ldlt().solve(rhs);
    CMatrix residual = delta_h;
    for (int i = 0; i < num_channels; ++i) residual -= dec.coefficients[i] * channels[i];
    dec.residual_norm = residual.norm();
    return dec;
}

/// u_i → u_i − δu_i on every slice.  A shifted amplitude outside the bound is
/// an error: clipping would break the exact cancellation the shift relies on.
inline PulseSequence shift_pulse(const PulseSequence& pulse, const ShiftDecomposition& dec) {
    if (!dec.feasible())
        throw std::invalid_argument("shift_pulse: decomposition is infeasible");
    if (dec.coefficients.size() != pulse.channels())
        throw std::invalid_argument("shift_pulse: channel count mismatch");
    PulseSequence shifted = pulse;
    shifted.amplitudes.colwise() -= dec.coefficients;
    if (!shifted.within_bounds())
        throw std::domain_error("shift_pulse: shifted amplitude exceeds the control bound");
    return shifted;
}

// ---------------------------------------------------------------------------
// The transformation matrix R relating parameter derivatives at x and x'
// ---------------------------------------------------------------------------

struct TransformMatrix {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    // Example 1 goes through the spherical→Cartesian change of variables;
    // the pair (C(x), C(x')) is kept for inspection.
    std::optional<std::pair<Eigen::Matrix3d, Eigen::Matrix3d>> jacobian_pair;
};

namespace detail {

// Jacobian of (B_x, B_y, B_z) with respect to (B, ϑ, φ).
inline Eigen::Matrix3d spherical_jacobian(const Eigen::Vector3d& x) {
    const double b = x[0], theta = x[1], phi = x[2];
    if (std::abs(b) < 1e-12 || std::abs(std::sin(theta)) < kPoleGuard)
        throw std::domain_error("transform_matrix: spherical Jacobian is singular "
                                "(B = 0 or ϑ at a pole)");
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    Eigen::Matrix3d c;
    c << st * cp, b * ct * cp, -b * st * sp,
         st * sp, b * ct * sp, b * st * cp,
         ct,      -b * st,     0.0;
    return c;
}

}  // namespace detail

/// R with ∂_{x'_α} L(x') = Σ_β ∂_{x_β} L(x) R_βα.  Example 2's derivatives do
/// not depend on the parameters at all, so R is the identity there.
inline TransformMatrix transform_matrix(const Scenario& s, const Eigen::Vector3d& x,
                                        const Eigen::Vector3d& x_prime) {
    TransformMatrix out;
    if (s.kind == ScenarioKind::example2) return out;
    const Eigen::Matrix3d c_at_x = detail::spherical_jacobian(x);
    const Eigen::Matrix3d c_at_xp = detail::spherical_jacobian(x_prime);
    out.r = c_at_x.inverse() * c_at_xp;
    out.jacobian_pair = {c_at_x, c_at_xp};
    return out;
}

// ---------------------------------------------------------------------------
// Bound prediction at the new parameter point
// ---------------------------------------------------------------------------

/// F(x') = Rᵀ F(x) R and its trace-inverse.
inline std::pair<Cfim, double> predict_bound(const Cfim& fisher_at_x, const TransformMatrix& t) {
    Cfim transformed;
    transformed.entries = t.r.transpose() * fisher_at_x.entries * t.r;
    transformed.divergent = fisher_at_x.divergent;
    return {transformed, cr_bound(transformed)};
}

/// Closed-form prediction for an example-1 direction change at fixed B:
/// tr F⁻¹(x') = C₁ δB̂² + C₂ δϑ̂² + C₃ δφ̂² with the δ̂² the diagonal entries
/// of F⁻¹(x).  Exact when F(x) is diagonal; the general transformation law
/// is authoritative otherwise.
inline double predict_bound_direction(const Cfim& fisher_at_x, double theta, double phi,
                                      double theta_prime, double phi_prime) {
    if (std::abs(std::sin(theta_prime)) < kPoleGuard)
        throw std::domain_error("predict_bound_direction: ϑ' at a pole");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(fisher_at_x.entries);
    const auto& lambda = eig.eigenvalues();
    if (fisher_at_x.divergent || lambda.minCoeff() <= 0.0 ||
        lambda.maxCoeff() / lambda.minCoeff() > kConditionCap)
        return kInfBound;
    const Eigen::Matrix3d f_inv = fisher_at_x.entries.inverse();
    const double db2 = f_inv(0, 0), dtheta2 = f_inv(1, 1), dphi2 = f_inv(2, 2);

    const double dphi = phi_prime - phi;
    const double st2 = std::sin(theta) * std::sin(theta);
    const double ct2 = std::cos(theta) * std::cos(theta);
    const double cd2 = std::cos(dphi) * std::cos(dphi);
    const double sd2 = std::sin(dphi) * std::sin(dphi);
    const double csc2 = 1.0 / (std::sin(theta_prime) * std::sin(theta_prime));

    const double c1 = ct2 + st2 * (cd2 + csc2 * sd2);
    const double c2 = st2 + ct2 * (cd2 + csc2 * sd2);
    const double c3 = st2 * csc2 * cd2 + st2 * sd2;
    return c1 * db2 + c2 * dtheta2 + c3 * dphi2;
}

// ---------------------------------------------------------------------------
// The theorem made executable
// ---------------------------------------------------------------------------

struct GeneralizeReport {
    ShiftDecomposition decomposition;
    PulseSequence shifted_pulse;     // populated only when feasible
    double direct_bound = kInfBound;     // full evaluation at x'
    double predicted_bound = kInfBound;  // transformation law from x
    Cfim fisher_at_x;
    Cfim predicted_fisher;

    bool feasible() const { return decomposition.feasible(); }
};

/// Shift the optimal pulse from x to x', evaluate it directly at x' and
/// predict the same bound through R; the two must agree when the theorem's
/// hypotheses hold.
inline GeneralizeReport generalize(const Scenario& s, const Eigen::Vector3d& x,
                                   const Eigen::Vector3d& x_prime,
                                   const PulseSequence& pulse_at_x) {
    GeneralizeReport report;
    report.decomposition = decompose_shift(s, x, x_prime);
    report.fisher_at_x = evaluate(materialize(s, x), pulse_at_x).fisher;
    if (!report.decomposition.feasible()) return report;

    report.shifted_pulse = shift_pulse(pulse_at_x, report.decomposition);
    report.direct_bound = evaluate(materialize(s, x_prime), report.shifted_pulse).bound;
    const TransformMatrix t = transform_matrix(s, x, x_prime);
    auto [predicted_fisher, predicted] = predict_bound(report.fisher_at_x, t);
    report.predicted_fisher = predicted_fisher;
    report.predicted_bound = predicted;
    return report;
}

}  // namespace qmetro
