#pragma once

// Reference computations written directly from definitions with plain loops,
// sharing nothing with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pbelab/mdp.hpp"

namespace oracle {

using pbelab::Distribution;
using pbelab::FeatureMatrix;
using pbelab::Matrix;
using pbelab::Mdp;
using pbelab::Vector;

/// (TQ)(s,a) = R(s,a) + γ Σ_x P(x|s,a) max_u Q(x,u).
inline Vector bellman_optimality(const Mdp& m, const Vector& q) {
    Vector out(m.num_pairs());
    for (std::size_t s = 0; s < m.num_states; ++s)
        for (std::size_t a = 0; a < m.num_actions; ++a) {
            const std::size_t i = s * m.num_actions + a;
            double acc = 0.0;
            for (std::size_t x = 0; x < m.num_states; ++x) {
                double best = q[x * m.num_actions];
                for (std::size_t u = 1; u < m.num_actions; ++u) best = std::max(best, q[x * m.num_actions + u]);
                acc += m.transition(i, x) * best;
            }
            out[i] = m.reward[i] + m.gamma * acc;
        }
    return out;
}

inline Vector value_iteration(const Mdp& m, double tol = 1e-14, std::size_t max_iter = 1000000) {
    Vector q(m.num_pairs(), 0.0);
    for (std::size_t k = 0; k < max_iter; ++k) {
        Vector next = bellman_optimality(m, q);
        double gap = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) gap = std::max(gap, std::abs(next[i] - q[i]));
        q = std::move(next);
        if (gap < tol) break;
    }
    return q;
}

/// F_η(θ, greedy(θ), d) summed pair by pair.
inline Vector pbe_field(const Mdp& m, const FeatureMatrix& f, const Distribution& d, const Vector& theta, double eta) {
    const std::size_t p = f.dim();
    auto score = [&](std::size_t pair) {
        double v = 0.0;
        for (std::size_t j = 0; j < p; ++j) v += f.phi(pair, j) * theta[j];
        return v;
    };
    Vector out(p, 0.0);
    for (std::size_t i = 0; i < m.num_pairs(); ++i) {
        double next = 0.0;
        for (std::size_t x = 0; x < m.num_states; ++x) {
            double best = score(x * m.num_actions);
            for (std::size_t u = 1; u < m.num_actions; ++u) best = std::max(best, score(x * m.num_actions + u));
            next += m.transition(i, x) * best;
        }
        const double td = m.reward[i] + m.gamma * next - score(i);
        for (std::size_t j = 0; j < p; ++j) out[j] += d[i] * f.phi(i, j) * td;
    }
    for (std::size_t j = 0; j < p; ++j) out[j] -= eta * theta[j];
    return out;
}

/// Random MDP with strictly positive transitions (so every chain is primitive).
inline Mdp random_mdp(std::uint64_t seed, std::size_t ns, std::size_t na, double gamma) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.05, 1.0), rew(-1.0, 1.0);
    Mdp m;
    m.num_states = ns;
    m.num_actions = na;
    m.gamma = gamma;
    m.transition = Matrix(ns * na, ns);
    m.reward.resize(ns * na);
    for (std::size_t i = 0; i < ns * na; ++i) {
        double total = 0.0;
        for (std::size_t x = 0; x < ns; ++x) total += m.transition(i, x) = unit(gen);
        for (std::size_t x = 0; x < ns; ++x) m.transition(i, x) /= total;
        m.reward[i] = rew(gen);
    }
    return m;
}

/// Invariant distribution by power iteration on a lazy version of the chain.
inline Vector power_stationary(const Matrix& p, std::size_t iters = 200000, double tol = 1e-15) {
    const std::size_t n = p.rows();
    Vector mu(n, 1.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < iters; ++k) {
        Vector next(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += mu[i] * (0.5 * p(i, j) + (i == j ? 0.5 : 0.0));
        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(next[i] - mu[i]));
        mu = std::move(next);
        if (gap < tol) break;
    }
    return mu;
}

inline Matrix random_stochastic(std::mt19937_64& gen, std::size_t n, double zero_prob = 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const bool keep = i == j || (j == (i + 1) % n) || unit(gen) >= zero_prob;
            p(i, j) = keep ? 0.01 + unit(gen) : 0.0;
            total += p(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) p(i, j) /= total;
    }
    return p;
}

}  // namespace oracle
