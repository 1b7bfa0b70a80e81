// Solution count of the two-arm problem as the exploration rate grows.
#include <cstdio>

#include "pbelab/pbelab.hpp"

using namespace pbelab;

int main() {
    const TwoArmInstance inst;
    const Mdp mdp = make_two_arm_mdp(inst);
    const FeatureMatrix phi = make_two_arm_features(inst);
    std::size_t last = 0;
    for (const auto& row : scan_epsilon(mdp, phi, default_epsilon_grid(), 0.0)) {
        if (row.count != last)
            std::printf("eps %.4f: %zu solution(s), %zu stable\n", row.epsilon, row.count, row.stable_count);
        last = row.count;
    }
    std::printf("closed-form threshold: %.6f\n", 0.01 / 0.255);
}
