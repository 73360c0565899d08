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

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qmetro {

using complexd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline const complexd kImag{0.0, 1.0};

// ---------------------------------------------------------------------------
// Elementary operators
// ---------------------------------------------------------------------------

inline CMatrix identity2() { return CMatrix::Identity(2, 2); }

inline CMatrix sigma_x() {
    CMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline CMatrix sigma_y() {
    CMatrix m(2, 2);
    m << complexd(0, 0), complexd(0, -1), complexd(0, 1), complexd(0, 0);
    return m;
}

inline CMatrix sigma_z() {
    CMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

enum class PauliAxis { x, y, z };

inline CMatrix pauli(PauliAxis axis) {
    switch (axis) {
        case PauliAxis::x: return sigma_x();
        case PauliAxis::y: return sigma_y();
        case PauliAxis::z: return sigma_z();
    }
    throw std::logic_error("unreachable pauli axis");
}

/// A single-qubit Pauli acting on one site of an m-qubit register,
/// I ⊗ ... ⊗ σ_a ⊗ ... ⊗ I.  Qubit 1 is the leftmost tensor factor.
struct PauliLabel {
    int qubit = 1;       // 1-based site index
    PauliAxis axis = PauliAxis::z;
    int num_qubits = 2;
};

// ---------------------------------------------------------------------------
// Tensor algebra helpers
// ---------------------------------------------------------------------------

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Embed a single-qubit Pauli into the full register.
inline CMatrix pauli_embed(const PauliLabel& label) {
    if (label.num_qubits < 1 || label.num_qubits > 2)
        throw std::out_of_range("pauli_embed: register size must be 1 or 2");
    if (label.qubit < 1 || label.qubit > label.num_qubits)
        throw std::out_of_range("pauli_embed: qubit index " + std::to_string(label.qubit) +
                                " outside register of " + std::to_string(label.num_qubits));
    CMatrix op = (label.qubit == 1) ? pauli(label.axis) : identity2();
    for (int site = 2; site <= label.num_qubits; ++site)
        op = kron(op, (site == label.qubit) ? pauli(label.axis) : identity2());
    return op;
}

// Column-stacking vectorisation: vec(M) stacks the columns of M, so that
// vec(A X B) = (Bᵀ ⊗ A) vec(X).
inline CVector vec(const CMatrix& m) {
    return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvec(const CVector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols)
        throw std::invalid_argument("unvec: size mismatch");
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

inline CMatrix unvec_square(const CVector& v) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
    return unvec(v, n, n);
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

inline bool all_finite(const CMatrix& m) {
    return m.allFinite();
}

inline double hermiticity_defect(const CMatrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const CMatrix& m, double tol = 1e-12) {
    return m.rows() == m.cols() && hermiticity_defect(m) <= tol;
}

inline double one_norm(const CMatrix& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace qmetro
