#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pbelab/dynamics.hpp"
#include "pbelab/scenario.hpp"

using namespace pbelab;

namespace {

Vector unique_solution(const Scenario& sc) {
    const SolutionSet set = enumerate_pbe_solutions(sc.mdp, sc.phi, nu_mode(sc), sc.eta);
    EXPECT_EQ(set.solutions.size(), 1u);
    return set.solutions.empty() ? Vector(sc.phi.dim(), 0.0) : set.solutions[0].theta;
}

// Two states, one action: s0 → s1 → s1 with features 1 and 3, all weight on s0.
// T = γ·3 − 1 > 0, so the expected update pushes θ away from its fixed point.
struct Expanding {
    Mdp mdp{2, 1, Matrix{{0.0, 1.0}, {0.0, 1.0}}, Vector{1.0, 0.0}, 0.9};
    FeatureMatrix phi{Matrix{{1.0}, {3.0}}};
    Distribution d{{1.0, 0.0}};
};

}  // namespace

TEST(StepSchedule, Values) {
    const StepSchedule rm = StepSchedule::robbins_monro(2, 10);
    EXPECT_DOUBLE_EQ(rm(0), 0.2);
    EXPECT_DOUBLE_EQ(rm(90), 0.02);
    EXPECT_DOUBLE_EQ(StepSchedule::constant(0.3)(12345), 0.3);
}

TEST(StepSchedule, Validation) {
    EXPECT_THROW(StepSchedule::robbins_monro(0, 10).validate(), Error);
    EXPECT_THROW(StepSchedule::robbins_monro(1, 0.5).validate(), Error);
    EXPECT_THROW(StepSchedule::constant(1.0).validate(), Error);
    EXPECT_THROW(StepSchedule::constant(0.0).validate(), Error);
    EXPECT_NO_THROW(StepSchedule::robbins_monro(2, 10).validate());
}

TEST(QLearning, ZeroRewardStaysAtZero) {
    Mdp m = oracle::random_mdp(51, 3, 2, 0.9);
    std::fill(m.reward.begin(), m.reward.end(), 0.0);
    for (double eta : {0.0, 0.7}) {
        const Trajectory t = run_q_learning(m, FeatureMatrix::tabular(6), {Distribution::uniform(6), 0.0, 3}, eta,
                                            StepSchedule::robbins_monro(2, 10), Vector(6, 0.0), {1000, 1e-9, 1, 5});
        for (const auto& th : t.thetas)
            for (double v : th) EXPECT_EQ(v, 0.0);
    }
}

TEST(QLearning, TabularReachesValueIterationFixedPoint) {
    const Mdp m = oracle::random_mdp(52, 3, 2, 0.9);
    const Trajectory t = run_q_learning(m, FeatureMatrix::tabular(6), {Distribution::uniform(6), 0.0, 1}, 0.0,
                                        StepSchedule::robbins_monro(2, 10), Vector(6, 0.0), {200000, 1e-6, 1000, 5});
    EXPECT_LE(distance_inf(t.theta_final, oracle::value_iteration(m)), 0.05);
}

TEST(QLearning, TabularWithLargerStepsReachesValueIterationFixedPoint) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mdp m = oracle::random_mdp(60 + seed, 3, 2, 0.9);
        const Trajectory t =
            run_q_learning(m, FeatureMatrix::tabular(6), {Distribution::uniform(6), 0.0, seed}, 0.0,
                           StepSchedule::robbins_monro(50, 60), Vector(6, 0.0), {200000, 1e-6, 1000, 5});
        EXPECT_LE(distance_inf(t.theta_final, oracle::value_iteration(m)), 0.05) << "seed " << seed;
    }
}

TEST(QLearning, FirstExampleConvergesNearReferenceValue) {
    const Scenario sc = builtin_scenario("ex1");
    const Trajectory t = run_q_learning(sc.mdp, sc.phi, {simulation_distribution(sc), 0.0, 1}, 0.0,
                                        StepSchedule::robbins_monro(2, 10), Vector(2, 0.0), {100000, 1e-6, 1000, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_NEAR(t.theta_final[0], -0.67, 0.05);
    EXPECT_NEAR(t.theta_final[1], -1.76, 0.05);
}

TEST(QLearning, BitwiseDeterministicInSeed) {
    const Scenario sc = builtin_scenario("ex3");
    const SamplerConfig cfg{simulation_distribution(sc), 0.25, 99};
    auto run = [&] {
        return run_q_learning(sc.mdp, sc.phi, cfg, 0.1, StepSchedule::robbins_monro(2, 10), Vector(2, 0.0),
                              {5000, 1e-9, 7, 5});
    };
    const Trajectory a = run(), b = run();
    EXPECT_EQ(a.thetas, b.thetas);
    EXPECT_EQ(a.residual_inf, b.residual_inf);
    EXPECT_EQ(a.policy_index, b.policy_index);
    EXPECT_EQ(a.theta_final, b.theta_final);
    const Trajectory c = run_q_learning(sc.mdp, sc.phi, {cfg.d, 0.25, 100}, 0.1, StepSchedule::robbins_monro(2, 10),
                                        Vector(2, 0.0), {5000, 1e-9, 7, 5});
    EXPECT_NE(a.theta_final, c.theta_final);
}

TEST(QLearning, SampledDirectionIsUnbiasedWithoutRegularization) {
    const Scenario sc = builtin_scenario("ex3");
    const Distribution d = simulation_distribution(sc);
    const SamplerConfig cfg{d, 0.5, 17};
    const Vector theta{0.3, -0.8};
    const std::size_t n = 100000;
    Vector mean(2, 0.0), sq(2, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const Vector dir = q_learning_direction(sc.mdp, sc.phi, cfg, 0.0, theta, k);
        for (std::size_t i = 0; i < 2; ++i) {
            mean[i] += dir[i];
            sq[i] += dir[i] * dir[i];
        }
    }
    const Vector expected = oracle::pbe_field(sc.mdp, sc.phi, d, theta, 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
        mean[i] /= n;
        const double se = std::sqrt((sq[i] / n - mean[i] * mean[i]) / n);
        EXPECT_LT(std::abs(mean[i] - expected[i]), 3 * se) << "coordinate " << i;
    }
}

TEST(QLearning, RegularizationTermIsScaledByFeatures) {
    // mean of φ_i(s,a)(δ − ηθ_i) is F_0(θ)_i − ηθ_i·E_d[φ_i]
    const Scenario sc = builtin_scenario("ex3");
    const Distribution d = simulation_distribution(sc);
    const SamplerConfig cfg{d, 0.0, 18};
    const Vector theta{0.3, -0.8};
    const double eta = 0.6;
    const std::size_t n = 100000;
    Vector mean(2, 0.0), sq(2, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const Vector dir = q_learning_direction(sc.mdp, sc.phi, cfg, eta, theta, k);
        for (std::size_t i = 0; i < 2; ++i) {
            mean[i] += dir[i];
            sq[i] += dir[i] * dir[i];
        }
    }
    Vector expected = oracle::pbe_field(sc.mdp, sc.phi, d, theta, 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
        double mean_phi = 0.0;
        for (std::size_t pair = 0; pair < 4; ++pair) mean_phi += d[pair] * sc.phi.phi(pair, i);
        expected[i] -= eta * theta[i] * mean_phi;
        mean[i] /= n;
        const double se = std::sqrt((sq[i] / n - mean[i] * mean[i]) / n);
        EXPECT_LT(std::abs(mean[i] - expected[i]), 3 * se) << "coordinate " << i;
    }
}

TEST(QLearning, BlowupIsReportedAsDiverging) {
    const Expanding e;
    const Trajectory t = run_q_learning(e.mdp, e.phi, {e.d, 0.0, 1}, 0.0, StepSchedule::constant(0.9), Vector{1.0},
                                        {100000, 1e-6, 100, 5});
    EXPECT_EQ(t.verdict, Verdict::diverging);
    EXPECT_LT(t.iterations, 100000u);
}

TEST(DeterministicQ, FirstExampleConvergesToUniqueSolution) {
    const Scenario sc = builtin_scenario("ex1");
    const Vector star = unique_solution(sc);
    const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                             StepSchedule::constant(0.1), Vector(2, 0.0), {100000, 1e-6, 100, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_LT(distance_inf(t.theta_final, star), 1e-4);
}

TEST(DeterministicQ, FirstExampleConvergesNearReferenceValue) {
    const Scenario sc = builtin_scenario("ex1");
    const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                             StepSchedule::constant(0.1), Vector(2, 0.0), {100000, 1e-6, 100, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_NEAR(t.theta_final[0], -0.67, 0.02);
    EXPECT_NEAR(t.theta_final[1], -1.76, 0.02);
}

TEST(DeterministicQ, FirstExampleDistanceIsNonIncreasing) {
    const Scenario sc = builtin_scenario("ex1");
    const Vector star = unique_solution(sc);
    for (double alpha : {0.1, 0.05}) {
        const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                                 StepSchedule::constant(alpha), Vector{3.0, -4.0}, {3000, 1e-12, 1, 5});
        for (std::size_t k = 11; k < t.thetas.size(); ++k)
            EXPECT_LE(distance_inf(t.thetas[k], star), distance_inf(t.thetas[k - 1], star) + 1e-15) << "k=" << k;
    }
}

TEST(DeterministicQ, SecondExampleDoesNotConverge) {
    const Scenario sc = builtin_scenario("ex2");
    Vector start = unique_solution(sc);
    for (double& v : start) v += 0.01;
    const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                             StepSchedule::constant(0.1), start, {100000, 1e-6, 1000, 5});
    EXPECT_NE(t.verdict, Verdict::converged);
}

TEST(DeterministicQ, ThirdExampleStaysAtNearbySolution) {
    const Scenario sc = builtin_scenario("ex3");
    const SolutionSet set = enumerate_pbe_solutions(sc.mdp, sc.phi, nu_mode(sc), 0.0);
    ASSERT_EQ(set.solutions.size(), 2u);
    const Vector star = set.solutions[0].theta;
    const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                             StepSchedule::constant(0.1), Vector{star[0] + 0.05, star[1] + 0.05},
                                             {100000, 1e-6, 100, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_NEAR(t.theta_final[0], star[0], 0.02);
    EXPECT_NEAR(t.theta_final[1], star[1], 0.02);
}

TEST(DeterministicQ, ConvergedRunsSatisfyTheEquation) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mdp m = oracle::random_mdp(70 + seed, 3, 2, 0.9);
        const Matrix f{{1, 0}, {0, 1}, {0.5, 0.5}, {1, -1}, {-0.3, 0.8}, {0.2, 0.1}};
        const Distribution d = Distribution::uniform(6);
        const double eta = 0.5 + 0.1 * static_cast<double>(seed);
        const double tol = 1e-7;
        const Trajectory t =
            run_deterministic_q(m, {f}, d, eta, StepSchedule::constant(0.5), Vector(2, 0.0), {200000, tol, 100, 5});
        if (t.verdict != Verdict::converged) continue;
        EXPECT_LT(max_abs(greedy_residual_map(m, {f}, d, eta)(t.theta_final)), 10 * tol);
        EXPECT_LT(t.residual_inf.back(), tol);
    }
}

TEST(Avi, SecondExampleConvergesQuickly) {
    const Scenario sc = builtin_scenario("ex2");
    const Vector star = unique_solution(sc);
    const Trajectory t = run_avi(sc.mdp, sc.phi, simulation_distribution(sc), 0.0, Vector(2, 0.0), {500, 1e-8, 10, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_LT(distance_inf(t.theta_final, star), 1e-6);
}

TEST(Avi, SecondExampleConvergesToReferenceValue) {
    const Scenario sc = builtin_scenario("ex2");
    const Trajectory t = run_avi(sc.mdp, sc.phi, simulation_distribution(sc), 0.0, Vector(2, 0.0), {500, 1e-8, 10, 5});
    EXPECT_EQ(t.verdict, Verdict::converged);
    EXPECT_NEAR(t.theta_final[0], -1.26, 0.02);
    EXPECT_NEAR(t.theta_final[1], 0.89, 0.02);
}

TEST(Avi, FirstExampleOscillates) {
    const Scenario sc = builtin_scenario("ex1");
    const Trajectory t =
        run_avi(sc.mdp, sc.phi, simulation_distribution(sc), 0.0, Vector(2, 0.0), {10000, 1e-6, 1, 5});
    EXPECT_EQ(t.verdict, Verdict::oscillating);
    const std::set<std::size_t> visited(t.policy_index.begin(), t.policy_index.end());
    EXPECT_GE(visited.size(), 2u);
}

TEST(Avi, TabularIsValueIterationStepByStep) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Mdp m = oracle::random_mdp(80 + seed, 3, 2, 0.9);
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        Vector w(6);
        double total = 0.0;
        for (double& v : w) total += v = u(gen);
        for (double& v : w) v /= total;
        const Trajectory t = run_avi(m, FeatureMatrix::tabular(6), {w}, 0.0, Vector(6, 0.0), {200, 1e-300, 1, 5});
        Vector q(6, 0.0);
        const Vector star = oracle::value_iteration(m);
        const double start_gap = distance_inf(q, star);
        for (std::size_t k = 1; k < t.thetas.size(); ++k) {
            q = oracle::bellman_optimality(m, q);
            EXPECT_LT(distance_inf(t.thetas[k], q), 1e-12) << "k=" << k;
            EXPECT_LE(distance_inf(t.thetas[k], star), std::pow(0.9, k) * start_gap + 1e-12);
        }
    }
}

TEST(Avi, SingularGramIsReported) {
    const Mdp m = oracle::random_mdp(90, 2, 2, 0.9);
    const Matrix f{{1, 2}, {2, 4}, {-1, -2}, {0.5, 1}};
    try {
        run_avi(m, {f}, Distribution::uniform(4), 0.0, Vector(2, 0.0), {10, 1e-6, 1, 5});
        FAIL() << "expected SingularSystem";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularSystem);
    }
}

TEST(Trajectory, ListsAlignAndFinalIterateIsStored) {
    const Scenario sc = builtin_scenario("ex3");
    const Trajectory t = run_deterministic_q(sc.mdp, sc.phi, simulation_distribution(sc), 0.0,
                                             StepSchedule::constant(0.1), Vector(2, 0.0), {1234, 1e-14, 100, 5});
    EXPECT_EQ(t.thetas.size(), t.residual_inf.size());
    EXPECT_EQ(t.thetas.size(), t.policy_index.size());
    EXPECT_EQ(t.thetas.size(), t.steps.size());
    EXPECT_EQ(t.steps.back(), t.iterations);
    EXPECT_EQ(t.thetas.back(), t.theta_final);
    EXPECT_EQ(t.steps[1], 100u);
}

TEST(ClassifyTrajectory, ConstantSequenceConverges) {
    EXPECT_EQ(classify_trajectory(std::vector<Vector>(10, Vector{1.0, 2.0}), 1e-8, 5), Verdict::converged);
}

TEST(ClassifyTrajectory, AlternatingSequenceOscillates) {
    std::vector<Vector> seq;
    for (int k = 0; k < 20; ++k) seq.push_back(k % 2 ? Vector{1.0, 0.0} : Vector{0.0, 0.0});
    EXPECT_EQ(classify_trajectory(seq, 1e-6, 5), Verdict::oscillating);
}

TEST(ClassifyTrajectory, DoublingSequenceDiverges) {
    std::vector<Vector> seq;
    for (int k = 0; k < 30; ++k) seq.push_back(Vector(3, std::ldexp(1.0, k)));
    EXPECT_EQ(classify_trajectory(seq, 1e-6, 5), Verdict::diverging);
}

TEST(ClassifyTrajectory, SlowDriftIsBudgetExhausted) {
    std::vector<Vector> seq;
    for (int k = 0; k < 30; ++k) seq.push_back(Vector{1.0 + 0.01 * k});
    EXPECT_EQ(classify_trajectory(seq, 1e-6, 5), Verdict::budget_exhausted);
}

TEST(ClassifyTrajectory, WindowMustBeAtLeastTwo) {
    EXPECT_THROW(classify_trajectory({Vector{1.0}}, 1e-6, 1), Error);
}

TEST(PolicyTrace, Encoding) {
    const FeatureMatrix phi = FeatureMatrix::tabular(4);
    const auto trace = policy_trace({Vector{1, 0, 1, 0}, Vector{0, 1, 0, 1}, Vector{1, 0, 0, 1}}, phi, 2);
    EXPECT_EQ(trace, (std::vector<std::size_t>{1, 4, 2}));
}

TEST(PolicyTrace, ConstantThetaGivesConstantTrace) {
    const auto trace = policy_trace(std::vector<Vector>(5, Vector{0.2, -0.3}), builtin_scenario("ex1").phi, 2);
    EXPECT_TRUE(std::all_of(trace.begin(), trace.end(), [&](std::size_t v) { return v == trace[0]; }));
}
