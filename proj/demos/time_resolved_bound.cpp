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

// Prints the CR bound along the evolution for the uncontrolled example-2
// system, the shape behind the time-resolved sweep output.

#include <cstdio>

#include "qmetro/fisher.hpp"

int main() {
    using namespace qmetro;
    const Scenario s = make_example2({1.0, 1.2, 0.1});
    const Evaluation ev =
        evaluate(s, PulseSequence::zero(s.channels(), s.horizon.steps, s.u_max));
    std::printf("%6s %12s\n", "t", "tr F^-1");
    for (std::size_t j = 0; j < ev.bound_series.size(); j += 5) {
        const double t = double(j) * s.horizon.dt;
        if (std::isfinite(ev.bound_series[j]))
            std::printf("%6.1f %12.5f\n", t, ev.bound_series[j]);
        else
            std::printf("%6.1f %12s\n", t, "inf");
    }
    return 0;
}
