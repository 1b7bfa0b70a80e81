#pragma once

#include <cmath>
#include <vector>

#include "pbelab/error.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/pbe.hpp"

namespace pbelab {

struct EpsilonScanRow {
    double epsilon = 0.0;
    std::vector<PbeSolution> solutions;
    std::vector<Stability> stability;  // one per solution
    std::size_t count = 0;
    std::size_t stable_count = 0;
    std::vector<SkippedPolicy> skipped_policies;
};

/// `count` uniform points on [start, stop].
inline std::vector<double> epsilon_grid(double start, double stop, std::size_t count) {
    if (count == 0) throw Error(ErrorKind::InvalidArgument, "epsilon grid needs at least one point");
    if (!(start > 0.0 && stop < 1.0 && start <= stop))
        throw Error(ErrorKind::InvalidArgument, "epsilon grid must lie inside (0,1) with start <= stop");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = count == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

inline std::vector<double> default_epsilon_grid() { return epsilon_grid(0.005, 0.995, 200); }

/// Solution set of the PBE with on-policy ε-greedy sampling, per grid point.
inline std::vector<EpsilonScanRow> scan_epsilon(const Mdp& mdp, const FeatureMatrix& phi,
                                                const std::vector<double>& eps_grid, double eta,
                                                TargetMode target = TargetMode::greedy) {
    for (double e : eps_grid)
        if (!(e > 0.0 && e < 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon grid values must lie in (0,1)");
    std::vector<EpsilonScanRow> rows;
    rows.reserve(eps_grid.size());
    for (double eps : eps_grid) {
        const NuMode mode = OnPolicyEpsNu{eps};
        SolutionSet set = enumerate_pbe_solutions(mdp, phi, mode, eta, AllDeterministic{}, target);
        EpsilonScanRow row;
        row.epsilon = eps;
        for (const auto& sol : set.solutions) {
            const Stability st = classify_stability(mdp, phi, sol.theta, sol.nu, eta, target, eps);
            row.stability.push_back(st);
            if (st == Stability::stable) ++row.stable_count;
        }
        row.solutions = std::move(set.solutions);
        row.count = row.solutions.size();
        row.skipped_policies = std::move(set.skipped);
        rows.push_back(std::move(row));
    }
    return rows;
}

/// One state, two actions, scalar features x (action 1) and y (action 2),
/// self-loop transitions, rewards r1 and r2.
struct TwoArmInstance {
    double x = 0.5;
    double y = 1.0;
    double r1 = -0.1;
    double r2 = -0.78;
    double gamma = 0.99;
};

struct TwoArmResult {
    double A1 = 0.0;
    double A2 = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    bool theta1_is_solution = false;
    bool theta2_is_solution = false;
    bool theta1_stable = false;
    bool theta2_stable = false;
};

inline Mdp make_two_arm_mdp(const TwoArmInstance& inst) {
    return {1, 2, Matrix{{1.0}, {1.0}}, Vector{inst.r1, inst.r2}, inst.gamma};
}

inline FeatureMatrix make_two_arm_features(const TwoArmInstance& inst) { return {Matrix{{inst.x}, {inst.y}}}; }

/// Closed form for the greedy-target, ε-greedy-sampled two-arm problem.
/// θ1 is the fixed point when action 1 is greedy (ν = (1−ε, ε)), θ2 when action 2 is.
inline TwoArmResult two_arm_closed_form(const TwoArmInstance& inst, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0,1)");
    if (!(inst.gamma > 0.0 && inst.gamma < 1.0)) throw Error(ErrorKind::GammaOutOfRange, "gamma must lie in (0,1)");
    const double x = inst.x, y = inst.y, g = inst.gamma, e = epsilon;
    TwoArmResult out;
    out.A1 = e * (-(1.0 - g) * x * x - g * x * y + y * y) + (1.0 - g) * x * x;
    out.A2 = e * (x * x - g * x * y - (1.0 - g) * y * y) + (1.0 - g) * y * y;
    if (std::abs(out.A1) < Tolerances::degenerate_denominator || std::abs(out.A2) < Tolerances::degenerate_denominator)
        throw Error(ErrorKind::DegenerateDenominator, "A1 or A2 vanishes at this epsilon");
    out.theta1 = ((1.0 - e) * x * inst.r1 + e * y * inst.r2) / out.A1;
    out.theta2 = (e * x * inst.r1 + (1.0 - e) * y * inst.r2) / out.A2;
    // θ is a solution when its own action stays in the tolerant argmax of (xθ, yθ)
    const auto greedy_ok = [&](double theta, std::size_t action) {
        const double scores[] = {x * theta, y * theta};
        const auto best = argmax_set(scores);
        return std::find(best.begin(), best.end(), action) != best.end();
    };
    out.theta1_is_solution = greedy_ok(out.theta1, 0);
    out.theta2_is_solution = greedy_ok(out.theta2, 1);
    out.theta1_stable = out.A1 > Tolerances::hurwitz;
    out.theta2_stable = out.A2 > Tolerances::hurwitz;
    return out;
}

}  // namespace pbelab
