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

// Optimise a control once, then carry it across a range of field strengths
// with the analytic shift instead of re-optimising.

#include <cstdio>

#include "qmetro/grape.hpp"
#include "qmetro/shift.hpp"

int main() {
    using namespace qmetro;
    const Scenario s = make_example1({1.0, M_PI / 4, M_PI / 4});

    GrapeConfig config;
    config.iterations = 60;
    std::printf("optimising at B = 1 (%d Adam iterations)...\n", config.iterations);
    const GrapeReport rep =
        grape_optimize(s, PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max), config);
    std::printf("optimised cr_bound at B = 1: %.6f\n\n", rep.best_bound);

    std::printf("%8s %14s %14s %14s\n", "B'", "no-control", "shifted", "predicted");
    for (double b_prime : {0.6, 0.8, 1.0, 1.2, 1.4, 1.6}) {
        const Eigen::Vector3d xp{b_prime, M_PI / 4, M_PI / 4};
        const Scenario at_xp = rebuild_scenario_params(s, xp);
        const double no_control =
            evaluate(at_xp, PulseSequence::zero(6, s.horizon.steps, s.u_max)).bound;
        const GeneralizeReport shift = generalize(s, s.params, xp, rep.best_pulse);
        std::printf("%8.2f %14.6f %14.6f %14.6f\n", b_prime, no_control, shift.direct_bound,
                    shift.predicted_bound);
    }
    return 0;
}
