#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "pbelab/error.hpp"
#include "pbelab/numerics.hpp"

namespace pbelab {

/// Finite discounted MDP in state-action layout: row s·|A| + a of `transition`
/// holds P(·|s,a) and entry s·|A| + a of `reward` holds E[r | s,a].
struct Mdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    Matrix transition;  // |S||A| × |S|
    Vector reward;      // |S||A|
    double gamma = 0.9;

    std::size_t num_pairs() const noexcept { return num_states * num_actions; }
    std::size_t index(std::size_t s, std::size_t a) const noexcept { return s * num_actions + a; }

    friend bool operator==(const Mdp&, const Mdp&) = default;
};

/// Feature matrix Φ with one row per state-action pair, same layout as Mdp.
struct FeatureMatrix {
    Matrix phi;  // |S||A| × p

    std::size_t dim() const noexcept { return phi.cols(); }
    std::span<const double> features(std::size_t pair) const { return phi.row(pair); }

    static FeatureMatrix tabular(std::size_t num_pairs) { return {Matrix::identity(num_pairs)}; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

enum class PolicyKind { deterministic, stochastic };

/// Action distribution per state; deterministic policies are stored one-hot.
struct Policy {
    PolicyKind kind = PolicyKind::stochastic;
    Matrix table;  // |S| × |A|

    std::size_t num_states() const noexcept { return table.rows(); }
    std::size_t num_actions() const noexcept { return table.cols(); }
    double operator()(std::size_t s, std::size_t a) const { return table(s, a); }

    /// Action with the largest probability in state s (lowest index on ties).
    std::size_t action(std::size_t s) const {
        std::size_t best = 0;
        for (std::size_t a = 1; a < num_actions(); ++a)
            if (table(s, a) > table(s, best)) best = a;
        return best;
    }

    static Policy deterministic(std::span<const std::size_t> actions, std::size_t num_actions) {
        Policy p{PolicyKind::deterministic, Matrix(actions.size(), num_actions)};
        for (std::size_t s = 0; s < actions.size(); ++s) {
            if (actions[s] >= num_actions) throw Error(ErrorKind::InvalidArgument, "action out of range");
            p.table(s, actions[s]) = 1.0;
        }
        return p;
    }
    static Policy uniform(std::size_t num_states, std::size_t num_actions) {
        return {PolicyKind::stochastic,
                Matrix(num_states, num_actions, 1.0 / static_cast<double>(num_actions))};
    }

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// Probability vector over state-action pairs.
struct Distribution {
    Vector weights;

    double operator[](std::size_t i) const { return weights[i]; }
    std::size_t size() const noexcept { return weights.size(); }

    static Distribution uniform(std::size_t n) { return {Vector(n, 1.0 / static_cast<double>(n))}; }

    friend bool operator==(const Distribution&, const Distribution&) = default;
};

namespace detail {

inline void check_probability_row(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double v : row) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, what + " has a non-finite entry");
        if (v < 0.0) throw Error(ErrorKind::NegativeProbability, what + " has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > Tolerances::probability_sum)
        throw Error(ErrorKind::NonStochasticRow, what + " sums to " + std::to_string(sum));
}

}  // namespace detail

inline void validate_mdp(const Mdp& mdp) {
    if (mdp.num_states == 0 || mdp.num_actions == 0)
        throw Error(ErrorKind::InvalidArgument, "MDP needs at least one state and one action");
    if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0))
        throw Error(ErrorKind::GammaOutOfRange, "gamma = " + std::to_string(mdp.gamma) + " not in (0,1)");
    if (mdp.transition.rows() != mdp.num_pairs() || mdp.transition.cols() != mdp.num_states)
        throw Error(ErrorKind::InvalidArgument, "transition must be |S||A| x |S|");
    if (mdp.reward.size() != mdp.num_pairs())
        throw Error(ErrorKind::InvalidArgument, "reward must have |S||A| entries");
    for (std::size_t i = 0; i < mdp.num_pairs(); ++i)
        detail::check_probability_row(mdp.transition.row(i), "transition row " + std::to_string(i));
    for (double r : mdp.reward)
        if (!std::isfinite(r)) throw Error(ErrorKind::InvalidArgument, "reward entries must be finite");
}

inline void validate_features(const Mdp& mdp, const FeatureMatrix& phi) {
    if (phi.phi.rows() != mdp.num_pairs())
        throw Error(ErrorKind::InvalidArgument, "feature matrix must have |S||A| rows");
    if (phi.dim() == 0) throw Error(ErrorKind::InvalidArgument, "feature dimension must be positive");
    if (!phi.phi.all_finite()) throw Error(ErrorKind::InvalidArgument, "feature entries must be finite");
}

inline void validate_policy(const Policy& pi, std::size_t num_states, std::size_t num_actions) {
    if (pi.num_states() != num_states || pi.num_actions() != num_actions)
        throw Error(ErrorKind::InvalidArgument, "policy table must be |S| x |A|");
    for (std::size_t s = 0; s < num_states; ++s)
        detail::check_probability_row(pi.table.row(s), "policy row " + std::to_string(s));
}

inline void validate_distribution(const Distribution& d, std::size_t num_pairs) {
    if (d.size() != num_pairs) throw Error(ErrorKind::InvalidArgument, "distribution must have |S||A| entries");
    detail::check_probability_row(d.weights, "distribution");
}

/// Scores φ(s,a)ᵀθ for every pair.
inline Vector action_values(const FeatureMatrix& phi, std::span<const double> theta) {
    if (theta.size() != phi.dim()) throw Error(ErrorKind::InvalidArgument, "theta length must equal p");
    return phi.phi * theta;
}

/// Tolerant argmax set of one state's scores.
inline std::vector<std::size_t> argmax_set(std::span<const double> scores) {
    double best = scores[0];
    for (double v : scores) best = std::max(best, v);
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < scores.size(); ++a)
        if (scores[a] >= best - Tolerances::argmax) out.push_back(a);
    return out;
}

enum class TieBreak { lowest_index };

/// Greedy actions per state; ties within Tolerances::argmax go to the lowest index.
inline std::vector<std::size_t> greedy_actions(const FeatureMatrix& phi, std::span<const double> theta,
                                               std::size_t num_actions) {
    const Vector q = action_values(phi, theta);
    const std::size_t num_states = q.size() / num_actions;
    std::vector<std::size_t> actions(num_states);
    for (std::size_t s = 0; s < num_states; ++s)
        actions[s] = argmax_set(std::span<const double>(q).subspan(s * num_actions, num_actions)).front();
    return actions;
}

inline Policy greedy_policy(const FeatureMatrix& phi, std::span<const double> theta, std::size_t num_actions,
                            TieBreak = TieBreak::lowest_index) {
    const auto actions = greedy_actions(phi, theta, num_actions);
    return Policy::deterministic(actions, num_actions);
}

struct EpsilonGreedy {
    double epsilon;
};
/// Plain softmax with inverse temperature tau.
struct Softmax {
    double tau;
};
struct TamedGibbs {
    double epsilon;
    double kappa0;
};
using PolicyRule = std::variant<EpsilonGreedy, Softmax, TamedGibbs>;

/// ε-greedy row from a tolerant argmax set: (1−ε)/|A*| on A*, ε/(|A|−|A*|) elsewhere,
/// uniform when every action ties.
inline void epsilon_greedy_row(std::span<const std::size_t> best, double epsilon, std::span<double> row) {
    const std::size_t na = row.size();
    if (best.size() == na) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(na));
        return;
    }
    const double off = epsilon / static_cast<double>(na - best.size());
    std::fill(row.begin(), row.end(), off);
    for (std::size_t a : best) row[a] = (1.0 - epsilon) / static_cast<double>(best.size());
}

/// ε-perturbation of a deterministic policy (its chosen action is the argmax set).
inline Policy epsilon_greedy_of(const Policy& deterministic, double epsilon) {
    Policy out{PolicyKind::stochastic, Matrix(deterministic.num_states(), deterministic.num_actions())};
    for (std::size_t s = 0; s < deterministic.num_states(); ++s) {
        const std::size_t best[] = {deterministic.action(s)};
        epsilon_greedy_row(best, epsilon, out.table.row(s));
    }
    return out;
}

namespace detail {

inline void softmax_row(std::span<const double> scores, double scale, std::span<double> row) {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : scores) top = std::max(top, scale * v);
    double total = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        row[a] = std::exp(scale * scores[a] - top);
        total += row[a];
    }
    for (double& v : row) v /= total;
}

}  // namespace detail

/// Temperature used by the tamed Gibbs rule.
inline double tamed_gibbs_temperature(std::span<const double> theta, double kappa0) {
    const double n = norm2(theta);
    return n >= 1.0 ? kappa0 / n : kappa0 / 2.0;
}

inline Policy make_policy(const FeatureMatrix& phi, std::span<const double> theta, std::size_t num_actions,
                          const PolicyRule& rule) {
    const Vector q = action_values(phi, theta);
    const std::size_t num_states = q.size() / num_actions;
    Policy out{PolicyKind::stochastic, Matrix(num_states, num_actions)};
    for (std::size_t s = 0; s < num_states; ++s) {
        const auto scores = std::span<const double>(q).subspan(s * num_actions, num_actions);
        auto row = out.table.row(s);
        std::visit(
            [&](const auto& r) {
                using R = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<R, EpsilonGreedy>) {
                    if (!(r.epsilon >= 0.0 && r.epsilon < 1.0))
                        throw Error(ErrorKind::InvalidArgument, "epsilon must lie in [0,1)");
                    epsilon_greedy_row(argmax_set(scores), r.epsilon, row);
                } else if constexpr (std::is_same_v<R, Softmax>) {
                    if (!(r.tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
                    detail::softmax_row(scores, r.tau, row);
                } else {
                    if (!(r.kappa0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa0 must be positive");
                    detail::softmax_row(scores, -tamed_gibbs_temperature(theta, r.kappa0), row);
                }
            },
            rule);
    }
    return out;
}

/// Π_π: |S| × |S||A|, row s is (e_s ⊗ π(s))ᵀ.
inline Matrix policy_matrix(const Policy& pi) {
    const std::size_t ns = pi.num_states(), na = pi.num_actions();
    Matrix m(ns, ns * na);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) m(s, s * na + a) = pi(s, a);
    return m;
}

/// State-action chain: entry [(s,a),(x,u)] = P(x|s,a)·β(u|x).
inline Matrix chain_matrix(const Mdp& mdp, const Policy& beta) {
    validate_policy(beta, mdp.num_states, mdp.num_actions);
    return mdp.transition * policy_matrix(beta);
}

/// Qᵖ = (I − γPΠ_π)⁻¹R.
inline Vector policy_q_values(const Mdp& mdp, const Policy& pi) {
    validate_policy(pi, mdp.num_states, mdp.num_actions);
    Matrix a = Matrix::identity(mdp.num_pairs()) - mdp.gamma * (mdp.transition * policy_matrix(pi));
    return solve_linear(a, mdp.reward);
}

/// J(π): mean over states of Σ_a π(a|s)Qᵖ(s,a).
inline double policy_score(const Mdp& mdp, const Policy& pi) {
    const Vector q = policy_q_values(mdp, pi);
    const Vector v = policy_matrix(pi) * q;
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(mdp.num_states);
}

/// 1-based lexicographic index of a deterministic policy: base-|A| digits,
/// first state most significant.
inline std::size_t policy_index(std::span<const std::size_t> actions, std::size_t num_actions) {
    std::size_t idx = 0;
    for (std::size_t a : actions) idx = idx * num_actions + a;
    return idx + 1;
}
inline std::size_t policy_index(const Policy& pi) {
    std::vector<std::size_t> actions(pi.num_states());
    for (std::size_t s = 0; s < pi.num_states(); ++s) actions[s] = pi.action(s);
    return policy_index(actions, pi.num_actions());
}

/// Inverse of policy_index.
inline std::vector<std::size_t> policy_actions(std::size_t index, std::size_t num_states, std::size_t num_actions) {
    std::vector<std::size_t> actions(num_states);
    std::size_t rest = index - 1;
    for (std::size_t s = num_states; s-- > 0;) {
        actions[s] = rest % num_actions;
        rest /= num_actions;
    }
    return actions;
}

}  // namespace pbelab
