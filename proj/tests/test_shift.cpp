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
#include "qmetro/shift.hpp"
#include "oracles.hpp"

using namespace qmetro;

namespace {

Eigen::Vector3d default_x1() { return {1.0, M_PI / 4, M_PI / 4}; }
Eigen::Vector3d default_x2() { return {1.0, 1.2, 0.1}; }

}  // namespace

TEST_CASE("same-direction field shifts decompose onto the qubit-1 channels", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const double b_prime = 1.7;
    const ShiftDecomposition dec = decompose_shift(s, s.params, {b_prime, M_PI / 4, M_PI / 4});
    REQUIRE(dec.feasible());
    const double delta = b_prime - 1.0;
    const double st = std::sin(M_PI / 4), ct = std::cos(M_PI / 4);
    CHECK(dec.coefficients[0] == Approx(delta * st * std::cos(M_PI / 4)).margin(1e-12));
    CHECK(dec.coefficients[1] == Approx(delta * st * std::sin(M_PI / 4)).margin(1e-12));
    CHECK(dec.coefficients[2] == Approx(delta * ct).margin(1e-12));
    CHECK(dec.coefficients.tail(3).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(dec.residual_norm < 1e-12);
}

TEST_CASE("coupling shifts cannot be absorbed by local channels", "[shift]") {
    const Scenario s = make_example2(default_x2());
    const double g_prime = 0.35;
    const ShiftDecomposition dec = decompose_shift(s, s.params, {1.0, 1.2, g_prime});
    CHECK_FALSE(dec.feasible());
    // ‖σz ⊗ σz‖_F = 2, so the residual is 2 |g' − g|.
    CHECK(dec.residual_norm == Approx(std::abs(g_prime - 0.1) * 2.0).margin(1e-12));
}

TEST_CASE("a null shift decomposes to nothing", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const ShiftDecomposition dec = decompose_shift(s, s.params, s.params);
    CHECK(dec.coefficients.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(dec.residual_norm < 1e-14);
    const PulseSequence pulse = random_pulse(s, 311, 0.5);
    const PulseSequence shifted = shift_pulse(pulse, dec);
    CHECK((shifted.amplitudes - pulse.amplitudes).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("the shifted pulse reproduces the trajectory slice by slice", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const Eigen::Vector3d x_prime{1.0 + 2.0 * M_PI / 5.0, M_PI / 4, M_PI / 4};
    const PulseSequence pulse = random_pulse(s, 313, 0.5);
    const PulseSequence shifted = shift_pulse(pulse, decompose_shift(s, s.params, x_prime));
    const Trajectory at_x = propagate(materialize(s, s.params), pulse);
    const Trajectory at_xp = propagate(materialize(s, x_prime), shifted);
    REQUIRE(at_x.states.size() == at_xp.states.size());
    for (size_t j = 0; j < at_x.states.size(); ++j)
        CHECK((at_x.states[j] - at_xp.states[j]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shifts that push amplitudes past the bound are rejected", "[shift]") {
    const Scenario s = make_example1(default_x1());
    PulseSequence pulse = PulseSequence::zero(6, s.horizon.steps, s.u_max);
    pulse.amplitudes.row(2).setConstant(-2.9);  // near the z-channel bound
    const ShiftDecomposition dec = decompose_shift(s, s.params, {1.5, M_PI / 4, M_PI / 4});
    CHECK_THROWS_AS(shift_pulse(pulse, dec), std::domain_error);
}

TEST_CASE("transformation matrix for a same-direction field change is diagonal", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const double b_prime = 1.6;
    const TransformMatrix t = transform_matrix(s, s.params, {b_prime, M_PI / 4, M_PI / 4});
    Eigen::Matrix3d want = Eigen::Vector3d(1.0, b_prime, b_prime).asDiagonal();
    CHECK((t.r - want).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(t.jacobian_pair.has_value());
}

TEST_CASE("transformation matrix of example 2 is the identity", "[shift]") {
    const Scenario s = make_example2(default_x2());
    const TransformMatrix t = transform_matrix(s, s.params, {1.4, 0.9, 0.1});
    CHECK((t.r - Eigen::Matrix3d::Identity()).norm() == 0.0);
    CHECK_FALSE(t.jacobian_pair.has_value());
}

TEST_CASE("transformation matrix is the identity at an unchanged point", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const TransformMatrix t = transform_matrix(s, s.params, s.params);
    CHECK((t.r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("poles and vanishing fields are singular for the Jacobian", "[shift]") {
    const Scenario s = make_example1(default_x1());
    CHECK_THROWS_AS(transform_matrix(s, s.params, {1.0, 0.0, 0.5}), std::domain_error);
    CHECK_THROWS_AS(transform_matrix(s, s.params, {1.0, M_PI, 0.5}), std::domain_error);
    CHECK_THROWS_AS(transform_matrix(s, {0.0, M_PI / 4, M_PI / 4}, s.params),
                    std::domain_error);
}

TEST_CASE("predict_bound through the identity changes nothing", "[shift]") {
    Cfim f;
    f.entries << 4.0, 0.5, 0.1, 0.5, 3.0, 0.2, 0.1, 0.2, 5.0;
    auto [f2, bound] = predict_bound(f, TransformMatrix{});
    CHECK((f2.entries - f.entries).norm() == 0.0);
    CHECK(bound == Approx(cr_bound(f)));
}

TEST_CASE("same-direction prediction follows the closed form and its limits", "[shift]") {
    const Scenario s = make_example1(default_x1());
    auto gen = oracle::rng(331);
    Cfim f;
    f.entries = Eigen::Vector3d(2.5, 1.2, 0.8).asDiagonal();
    const Eigen::Vector3d f_inv_diag(1.0 / 2.5, 1.0 / 1.2, 1.0 / 0.8);

    double previous = kInfBound;
    for (double b_prime : {0.3, 0.6, 1.0, 1.8, 3.0, 10.0, 100.0}) {
        const TransformMatrix t = transform_matrix(s, s.params, {b_prime, M_PI / 4, M_PI / 4});
        const double bound = predict_bound(f, t).second;
        const double ratio = 1.0 / b_prime;  // B = 1
        const double want = f_inv_diag[0] + ratio * ratio * (f_inv_diag[1] + f_inv_diag[2]);
        CHECK(bound == Approx(want).epsilon(1e-10));
        CHECK(bound < previous);           // decreasing in B'
        CHECK(bound >= f_inv_diag[0]);     // bounded below by the B variance
        previous = bound;
    }
}

TEST_CASE("direction-change prediction: special cases of the closed form", "[shift]") {
    Cfim f;
    f.entries = Eigen::Vector3d(2.0, 1.5, 0.5).asDiagonal();
    const double base = cr_bound(f);

    SECTION("unchanged direction keeps the bound") {
        CHECK(predict_bound_direction(f, M_PI / 4, M_PI / 4, M_PI / 4, M_PI / 4) ==
              Approx(base).epsilon(1e-12));
    }
    SECTION("azimuthal changes on the equator are free") {
        for (double dphi : {0.3, 1.0, 2.5})
            CHECK(predict_bound_direction(f, M_PI / 2, 0.2, M_PI / 2, 0.2 + dphi) ==
                  Approx(base).epsilon(1e-12));
    }
    SECTION("fixed azimuth reduces to the block-diagonal expression") {
        const double theta = M_PI / 4, theta_prime = 1.1;
        const double want = 1.0 / 2.0 + 1.0 / 1.5 +
                            std::pow(std::sin(theta) / std::sin(theta_prime), 2) / 0.5;
        CHECK(predict_bound_direction(f, theta, 0.7, theta_prime, 0.7) ==
              Approx(want).epsilon(1e-12));
    }
    SECTION("poles are singular") {
        CHECK_THROWS_AS(predict_bound_direction(f, M_PI / 4, 0.0, 0.0, 0.0),
                        std::domain_error);
        CHECK_THROWS_AS(predict_bound_direction(f, M_PI / 4, 0.0, M_PI, 0.0),
                        std::domain_error);
    }
}

TEST_CASE("closed form agrees with the general law on diagonal Fisher matrices", "[shift]") {
    const Scenario s = make_example1(default_x1());
    auto gen = oracle::rng(337);
    std::uniform_real_distribution<double> diag_dist(0.4, 4.0);
    std::uniform_real_distribution<double> theta_dist(0.3, M_PI - 0.3);
    std::uniform_real_distribution<double> phi_dist(0.0, 2.0 * M_PI - 1e-6);
    for (int trial = 0; trial < 25; ++trial) {
        Cfim f;
        f.entries = Eigen::Vector3d(diag_dist(gen), diag_dist(gen), diag_dist(gen)).asDiagonal();
        const double theta = theta_dist(gen), phi = phi_dist(gen);
        const double theta_p = theta_dist(gen), phi_p = phi_dist(gen);
        const Eigen::Vector3d x{1.0, theta, phi}, xp{1.0, theta_p, phi_p};
        const double closed = predict_bound_direction(f, theta, phi, theta_p, phi_p);
        const double general = predict_bound(f, transform_matrix(s, x, xp)).second;
        REQUIRE(std::abs(closed - general) <= 1e-10 * std::max(1.0, std::abs(general)));
    }
}

TEST_CASE("generalize: omega shifts in example 2 keep the bound constant", "[shift]") {
    const Scenario s = make_example2(default_x2());
    const PulseSequence pulse = random_pulse(s, 347, 0.4);
    const double at_x = evaluate(s, pulse).bound;
    const GeneralizeReport rep = generalize(s, s.params, {1.45, 1.2, 0.1}, pulse);
    REQUIRE(rep.feasible());
    CHECK(std::abs(rep.direct_bound - at_x) < 1e-8);
    CHECK(std::abs(rep.predicted_bound - at_x) < 1e-10);
}

TEST_CASE("generalize: direct and predicted bounds agree for field rescalings", "[shift]") {
    const Scenario s = make_example1(default_x1());
    const PulseSequence pulse = random_pulse(s, 349, 0.4);
    for (double b_prime : {0.5, 1.5}) {
        const GeneralizeReport rep =
            generalize(s, s.params, {b_prime, M_PI / 4, M_PI / 4}, pulse);
        REQUIRE(rep.feasible());
        REQUIRE(std::isfinite(rep.direct_bound));
        CHECK(std::abs(rep.direct_bound - rep.predicted_bound) <=
              1e-6 * std::abs(rep.direct_bound));
    }
}

TEST_CASE("generalize: coupling shifts come back infeasible", "[shift]") {
    const Scenario s = make_example2(default_x2());
    const GeneralizeReport rep =
        generalize(s, s.params, {1.0, 1.2, 0.4}, random_pulse(s, 353, 0.4));
    CHECK_FALSE(rep.feasible());
    CHECK(rep.decomposition.residual_norm > 0.1);
}

TEST_CASE("the Fisher matrix transforms as Rᵀ F R", "[shift]") {
    // Wide control bound: arbitrary direction changes need headroom of up to
    // B + B' on a single channel.
    const Scenario s = make_example1(default_x1(), 0.2, 5.0, 0.1, 10.0);
    auto gen = oracle::rng(359);
    std::uniform_real_distribution<double> b_dist(0.6, 1.8);
    std::uniform_real_distribution<double> theta_dist(0.4, M_PI - 0.4);
    std::uniform_real_distribution<double> phi_dist(0.0, 2.0 * M_PI - 1e-6);
    const PulseSequence pulse = random_pulse(s, 361, 0.3);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Vector3d x{b_dist(gen), theta_dist(gen), phi_dist(gen)};
        const Eigen::Vector3d xp{b_dist(gen), theta_dist(gen), phi_dist(gen)};
        const ShiftDecomposition dec = decompose_shift(s, x, xp);
        REQUIRE(dec.feasible());
        const PulseSequence shifted = shift_pulse(pulse, dec);
        const Cfim at_x = evaluate(materialize(s, x), pulse).fisher;
        const Cfim at_xp = evaluate(materialize(s, xp), shifted).fisher;
        const TransformMatrix t = transform_matrix(s, x, xp);
        const Eigen::Matrix3d want = t.r.transpose() * at_x.entries * t.r;
        REQUIRE((at_xp.entries - want).cwiseAbs().maxCoeff() <= 1e-8);
    }
}
