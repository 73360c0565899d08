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

#include <cmath>
#include <stdexcept>
#include <utility>

#include "qmetro/matrix.hpp"

namespace qmetro {

// ---------------------------------------------------------------------------
// Matrix exponential, scaling-and-squaring with a fixed Padé(13,13) kernel
// and 1-norm based scaling.  The order is not adapted to the input, which
// keeps results bit-stable for a given platform rounding mode.
// ---------------------------------------------------------------------------

namespace detail {

// Padé(13,13) numerator coefficients for exp.
inline constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

// 1-norm bound under which Padé(13,13) is accurate to double precision.
inline constexpr double kTheta13 = 5.371920351148152;

inline CMatrix expm_pade13(const CMatrix& a) {
    const auto n = a.rows();
    const CMatrix ident = CMatrix::Identity(n, n);
    const CMatrix a2 = a * a;
    const CMatrix a4 = a2 * a2;
    const CMatrix a6 = a2 * a4;
    const double* b = kPade13;
    const CMatrix u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
             b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    const CMatrix v =
        a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
        b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
    return (v - u).partialPivLu().solve(v + u);
}

}  // namespace detail

/// e^A for a square complex matrix.
inline CMatrix expm(const CMatrix& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("expm: matrix must be square");
    if (!all_finite(a))
        throw std::invalid_argument("expm: non-finite input");
    const double norm = one_norm(a);
    int squarings = 0;
    if (norm > detail::kTheta13)
        squarings = static_cast<int>(std::ceil(std::log2(norm / detail::kTheta13)));
    CMatrix f = detail::expm_pade13(a / std::pow(2.0, squarings));
    for (int k = 0; k < squarings; ++k)
        f = f * f;
    return f;
}

/// e^A together with the Fréchet derivative L(A,E) = d/ds e^{A+sE}|_{s=0},
/// read off the upper-right block of exp([[A,E],[0,A]]).  The direction is
/// normalised first so the block norm stays comparable to ‖A‖.
inline std::pair<CMatrix, CMatrix> expm_frechet(const CMatrix& a, const CMatrix& e) {
    if (a.rows() != a.cols() || e.rows() != e.cols() || a.rows() != e.rows())
        throw std::invalid_argument("expm_frechet: dimension mismatch");
    const auto n = a.rows();
    const double eta = one_norm(e);
    if (eta == 0.0)
        return {expm(a), CMatrix::Zero(n, n)};
    CMatrix block = CMatrix::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = a;
    block.bottomRightCorner(n, n) = a;
    block.topRightCorner(n, n) = e / eta;
    const CMatrix f = expm(block);
    return {f.topLeftCorner(n, n), eta * f.topRightCorner(n, n)};
}

namespace detail {

// Upper-right block of exp([[A,E1,0],[0,A,E2],[0,0,A]]): the sum over words
// of the exponential series containing E1 once, then E2 once, in that order.
inline CMatrix mixed_block(const CMatrix& a, const CMatrix& e1, const CMatrix& e2) {
    const auto n = a.rows();
    CMatrix block = CMatrix::Zero(3 * n, 3 * n);
    block.block(0, 0, n, n) = a;
    block.block(n, n, n, n) = a;
    block.block(2 * n, 2 * n, n, n) = a;
    block.block(0, n, n, n) = e1;
    block.block(n, 2 * n, n, n) = e2;
    return expm(block).block(0, 2 * n, n, n);
}

}  // namespace detail

/// Mixed second directional derivative ∂²/∂s∂t e^{A+sE1+tE2}|_{s=t=0}.
/// Symmetric in (E1, E2) by construction.
inline CMatrix expm_frechet2(const CMatrix& a, const CMatrix& e1, const CMatrix& e2) {
    if (a.rows() != a.cols() || e1.rows() != a.rows() || e2.rows() != a.rows() ||
        e1.cols() != a.cols() || e2.cols() != a.cols())
        throw std::invalid_argument("expm_frechet2: dimension mismatch");
    const auto n = a.rows();
    const double eta1 = one_norm(e1);
    const double eta2 = one_norm(e2);
    if (eta1 == 0.0 || eta2 == 0.0)
        return CMatrix::Zero(n, n);
    const CMatrix u1 = e1 / eta1;
    const CMatrix u2 = e2 / eta2;
    return eta1 * eta2 *
           (detail::mixed_block(a, u1, u2) + detail::mixed_block(a, u2, u1));
}

}  // namespace qmetro
