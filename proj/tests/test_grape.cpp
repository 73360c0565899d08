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

#include <catch2/catch.hpp>

#include "qmetro/grape.hpp"
#include "oracles.hpp"

using namespace qmetro;

namespace {

Eigen::Vector3d default_x1() { return {1.0, M_PI / 4, M_PI / 4}; }
Eigen::Vector3d default_x2() { return {1.0, 1.2, 0.1}; }

double fd_f0(const ScenarioOps& ops, const PulseSequence& pulse, int i, int j, double h) {
    PulseSequence plus = pulse, minus = pulse;
    plus.amplitudes(i, j) += h;
    minus.amplitudes(i, j) -= h;
    return (evaluate(ops, plus).f0 - evaluate(ops, minus).f0) / (2.0 * h);
}

}  // namespace

TEST_CASE("grape gradient matches finite differences", "[grape]") {
    for (int example = 1; example <= 2; ++example) {
        const Scenario s = example == 1 ? make_example1(default_x1())
                                        : make_example2(default_x2());
        const ScenarioOps ops = materialize(s);
        const PulseSequence pulse = random_pulse(s, 211 + example, 0.6);
        const Eigen::MatrixXd grad = grape_gradient(ops, pulse);
        auto pick = oracle::rng(223);
        for (int trial = 0; trial < 8; ++trial) {
            const int i = static_cast<int>(pick() % 6);
            const int j = static_cast<int>(pick() % 50);
            const double fd = fd_f0(ops, pulse, i, j, 1e-6);
            REQUIRE(std::abs(grad(i, j) - fd) <= 1e-5 * std::max(std::abs(fd), 1e-12));
        }
    }
}

TEST_CASE("one small ascent step along the gradient raises f0", "[grape]") {
    const Scenario s = make_example1(default_x1());
    const ScenarioOps ops = materialize(s);
    const PulseSequence pulse = random_pulse(s, 227, 0.5);
    const Eigen::MatrixXd grad = grape_gradient(ops, pulse);
    PulseSequence stepped = pulse;
    stepped.amplitudes += 1e-4 * grad;
    CHECK(evaluate(ops, stepped).f0 > evaluate(ops, pulse).f0);
}

TEST_CASE("zero iterations return the initial pulse unchanged", "[grape]") {
    const Scenario s = make_example1(default_x1(), 0.2, 1.0, 0.1);
    const PulseSequence init = random_pulse(s, 229, 0.5);
    GrapeConfig config;
    config.iterations = 0;
    const GrapeReport rep = grape_optimize(s, init, config);
    CHECK((rep.best_pulse.amplitudes - init.amplitudes).norm() == 0.0);
    CHECK(rep.history.size() == 1);
}

TEST_CASE("gradient descent improves on the no-control bound", "[grape]") {
    const Scenario s = make_example1(default_x1(), 0.2, 1.0, 0.1);  // short horizon
    const ScenarioOps ops = materialize(s);
    const PulseSequence zero = PulseSequence::zero(6, s.horizon.steps, s.u_max);
    const double uncontrolled = evaluate(ops, zero).bound;
    GrapeConfig config;
    config.method = GrapeMethod::gd;
    config.iterations = 40;
    const GrapeReport rep = grape_optimize(ops, zero, config);
    CHECK(rep.best_bound < uncontrolled);
    CHECK(rep.best_pulse.within_bounds());
}

TEST_CASE("best-so-far f0 is the max over the history", "[grape]") {
    const Scenario s = make_example2(default_x2(), 0.1, 0.1, 1.0, 0.1);
    GrapeConfig config;
    config.iterations = 10;
    const GrapeReport rep = grape_optimize(s, random_pulse(s, 233, 0.5), config);
    double best = 0.0;
    for (const auto& it : rep.history) best = std::max(best, it.f0);
    CHECK(rep.best_f0 == best);
}

TEST_CASE("identical seed and config give bit-identical reports", "[grape]") {
    const Scenario s = make_example2(default_x2(), 0.1, 0.1, 1.0, 0.1);
    GrapeConfig config;
    config.iterations = 5;
    const PulseSequence init = random_pulse(s, 239, 0.8);
    const GrapeReport a = grape_optimize(s, init, config);
    const GrapeReport b = grape_optimize(s, init, config);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t k = 0; k < a.history.size(); ++k) {
        CHECK(a.history[k].f0 == b.history[k].f0);
        CHECK(a.history[k].bound == b.history[k].bound);
    }
    CHECK((a.best_pulse.amplitudes - b.best_pulse.amplitudes).norm() == 0.0);
}

TEST_CASE("a channel commuting with everything downstream has zero CFIM gradient", "[grape]") {
    // z control on qubit 2 commutes with the example-2 free Hamiltonian, the
    // dephasing operators, an x-on-qubit-1 control and a POVM diagonal in the
    // qubit-2 z basis, so no Fisher entry can respond to it.
    const Scenario base = make_example2(default_x2(), 0.1, 0.1, 1.0, 0.1);
    ScenarioOps ops = materialize(base);
    ops.controls = {pauli_embed({2, PauliAxis::z, 2}), pauli_embed({1, PauliAxis::x, 2})};

    CVector plus(2), zero_ket(2), one_ket(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    zero_ket << 1, 0;
    one_ket << 0, 1;
    CVector minus(2);
    minus << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    auto proj2 = [](const CVector& a, const CVector& b) {
        CVector k(4);
        k << a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1];
        return CMatrix(k * k.adjoint());
    };
    ops.povm = {proj2(plus, zero_ket), proj2(plus, one_ket), proj2(minus, zero_ket),
                proj2(minus, one_ket)};
    ops.probe = proj2(plus, plus);

    auto gen = oracle::rng(241);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    PulseSequence pulse = PulseSequence::zero(2, ops.horizon.steps, base.u_max);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < pulse.steps(); ++j) pulse.amplitudes(i, j) = dist(gen);

    const CfimDiagonalGradient g = cfim_diagonal_gradient(ops, pulse);
    double live = 0.0;
    for (int alpha = 0; alpha < 3; ++alpha) {
        CHECK(g.dfisher_diag[alpha].row(0).cwiseAbs().maxCoeff() < 1e-12);
        live = std::max(live, g.dfisher_diag[alpha].row(1).cwiseAbs().maxCoeff());
    }
    CHECK(live > 1e-6);  // the x channel does respond
}

TEST_CASE("the gradient vanishes at a converged optimum", "[grape][slow]") {
    // Two-slice, single-channel problem: small enough to polish to a true
    // stationary point with a Newton refinement on the analytic gradient.
    const Scenario s = make_example1(default_x1(), 0.2, 0.4, 0.2, 10.0);
    ScenarioOps ops = materialize(s);
    ops.controls = {ops.controls[0]};
    PulseSequence pulse = PulseSequence::zero(1, 2, s.u_max);

    GrapeConfig warm;
    warm.learning_rate = 0.1;
    warm.iterations = 150;
    warm.clip_to_bounds = false;
    pulse = grape_optimize(ops, pulse, warm).best_pulse;

    auto flat_grad = [&](const PulseSequence& q) {
        Eigen::MatrixXd g = grape_gradient(ops, q);
        return Eigen::Vector2d(g(0, 0), g(0, 1));
    };
    Eigen::Vector2d grad = flat_grad(pulse);
    const double h = 1e-4;
    for (int step = 0; step < 8 && grad.norm() > 1e-8; ++step) {
        Eigen::Matrix2d hess;
        for (int c = 0; c < 2; ++c) {
            PulseSequence plus = pulse, minus = pulse;
            plus.amplitudes(0, c) += h;
            minus.amplitudes(0, c) -= h;
            hess.col(c) = (flat_grad(plus) - flat_grad(minus)) / (2.0 * h);
        }
        pulse.amplitudes.row(0) += hess.fullPivLu().solve(-grad).transpose();
        grad = flat_grad(pulse);
    }
    REQUIRE(grad.norm() < 1e-6);
}
