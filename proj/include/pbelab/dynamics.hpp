#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "pbelab/error.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/numerics.hpp"
#include "pbelab/pbe.hpp"
#include "pbelab/rng.hpp"

namespace pbelab {

struct StepSchedule {
    enum class Kind { robbins_monro, constant };
    Kind kind = Kind::robbins_monro;
    double a = 2.0;
    double b = 10.0;
    double alpha = 0.1;

    static StepSchedule robbins_monro(double a, double b) { return {Kind::robbins_monro, a, b, 0.0}; }
    static StepSchedule constant(double alpha) { return {Kind::constant, 0.0, 0.0, alpha}; }

    void validate() const {
        if (kind == Kind::robbins_monro) {
            if (!(a > 0.0) || !(b >= 1.0))
                throw Error(ErrorKind::InvalidArgument, "robbins-monro schedule needs a > 0 and b >= 1");
        } else if (!(alpha > 0.0 && alpha < 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "constant step must lie in (0,1)");
        }
    }

    double operator()(std::uint64_t k) const {
        return kind == Kind::constant ? alpha : a / (static_cast<double>(k) + b);
    }

    friend bool operator==(const StepSchedule&, const StepSchedule&) = default;
};

struct SamplerConfig {
    Distribution d;
    double reward_noise_halfwidth = 0.0;
    std::uint64_t seed = 0;
};

enum class Verdict { converged, oscillating, diverging, budget_exhausted };

inline std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::converged: return "converged";
    case Verdict::oscillating: return "oscillating";
    case Verdict::diverging: return "diverging";
    case Verdict::budget_exhausted: return "budget_exhausted";
    }
    return "unknown";
}

struct RunOptions {
    std::size_t max_iter = 100000;
    double tol = 1e-6;
    std::size_t stride = 100;
    std::size_t window = 5;
};

/// Subsampled run record. `steps[i]` is the iteration number of `thetas[i]`.
struct Trajectory {
    std::vector<std::size_t> steps;
    std::vector<Vector> thetas;
    Vector residual_inf;
    std::vector<std::size_t> policy_index;
    Verdict verdict = Verdict::budget_exhausted;
    Vector theta_final;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
};

/// Verdict for a raw iterate sequence (typically the tail of a run).
inline Verdict classify_trajectory(const std::vector<Vector>& iterates, double tol, std::size_t window) {
    if (window < 2) throw Error(ErrorKind::InvalidArgument, "window must be at least 2");
    const std::size_t n = iterates.size();
    if (n == 0) return Verdict::budget_exhausted;
    for (const auto& t : iterates)
        if (!(max_abs(t) <= Tolerances::blowup)) return Verdict::diverging;

    if (n > window) {
        bool settled = true;
        for (std::size_t k = n - window; k < n; ++k)
            settled = settled && distance_inf(iterates[k], iterates[k - 1]) < tol;
        if (settled) return Verdict::converged;
    }

    if (n >= 4) {
        const std::size_t half = n / 2;
        bool monotone = true;
        for (std::size_t k = half + 1; k < n; ++k) monotone = monotone && max_abs(iterates[k]) >= max_abs(iterates[k - 1]);
        const double start = max_abs(iterates[half]);
        if (monotone && start > 0.0 && max_abs(iterates.back()) >= 10.0 * start) return Verdict::diverging;
    }

    const std::size_t tail = std::min(n, std::max<std::size_t>(2 * window, 16));
    const std::size_t first = n - tail;
    bool moving = true;
    for (std::size_t k = first + 1; k < n; ++k) moving = moving && distance_inf(iterates[k], iterates[k - 1]) >= tol;
    if (moving && tail >= 3) {
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t i = first; i < n; ++i)
            for (std::size_t j = i + 2; j < n; ++j) closest = std::min(closest, distance_inf(iterates[i], iterates[j]));
        if (closest < tol) return Verdict::oscillating;
    }
    return Verdict::budget_exhausted;
}

inline std::vector<std::size_t> policy_trace(const std::vector<Vector>& thetas, const FeatureMatrix& phi,
                                             std::size_t num_actions) {
    std::vector<std::size_t> out;
    out.reserve(thetas.size());
    for (const auto& t : thetas) out.push_back(policy_index(greedy_actions(phi, t, num_actions), num_actions));
    return out;
}

namespace detail {

/// max_a φ(s,a)ᵀθ for every state.
inline Vector greedy_state_values(const FeatureMatrix& phi, std::span<const double> theta, std::size_t num_actions) {
    const Vector q = action_values(phi, theta);
    const std::size_t ns = q.size() / num_actions;
    Vector v(ns);
    for (std::size_t s = 0; s < ns; ++s)
        v[s] = *std::max_element(q.begin() + static_cast<std::ptrdiff_t>(s * num_actions),
                                 q.begin() + static_cast<std::ptrdiff_t>((s + 1) * num_actions));
    return v;
}

inline std::size_t sample_index(std::span<const double> weights, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    // u landed in the rounding slack above the last cumulative sum
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

/// Shared loop: step(k, θ) returns θ_{k+1}; residual(θ) is the recorded fixed-point residual.
template <class Step>
Trajectory iterate(const Step& step, const std::function<Vector(std::span<const double>)>& residual,
                   const FeatureMatrix& phi, std::size_t num_actions, Vector theta, const RunOptions& opt,
                   std::uint64_t seed) {
    if (opt.max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be at least 1");
    if (opt.stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be at least 1");
    if (opt.window < 2) throw Error(ErrorKind::InvalidArgument, "window must be at least 2");
    if (theta.size() != phi.dim()) throw Error(ErrorKind::InvalidArgument, "theta0 length must equal feature dimension");

    Trajectory traj;
    traj.seed = seed;
    auto record = [&](std::size_t k, const Vector& t, double res) {
        traj.steps.push_back(k);
        traj.thetas.push_back(t);
        traj.residual_inf.push_back(res);
        traj.policy_index.push_back(policy_index(greedy_actions(phi, t, num_actions), num_actions));
    };
    auto residual_of = [&](const Vector& t) { return max_abs(residual(t)); };

    const std::size_t keep = std::max<std::size_t>(2 * opt.window, 64);
    std::deque<Vector> tail{theta};
    record(0, theta, residual_of(theta));
    std::size_t quiet = 0;
    std::size_t k = 0;
    bool stopped = false;
    while (k < opt.max_iter) {
        Vector next = step(k, theta);
        ++k;
        quiet = distance_inf(next, theta) < opt.tol ? quiet + 1 : 0;
        theta = std::move(next);
        tail.push_back(theta);
        if (tail.size() > keep) tail.pop_front();

        const bool finite = std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
        if (!finite || max_abs(theta) > Tolerances::blowup) {
            traj.verdict = Verdict::diverging;
            stopped = true;
            break;
        }
        if (quiet >= opt.window) {
            const double res = residual_of(theta);
            if (res < opt.tol) {
                traj.verdict = Verdict::converged;
                record(k, theta, res);
                stopped = true;
                break;
            }
        }
        if (k % opt.stride == 0) record(k, theta, residual_of(theta));
    }
    traj.iterations = k;
    traj.theta_final = theta;
    if (traj.steps.back() != k) {
        const bool finite = std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
        record(k, theta, finite ? residual_of(theta) : std::numeric_limits<double>::infinity());
    }
    if (!stopped) {
        const Verdict v = classify_trajectory(std::vector<Vector>(tail.begin(), tail.end()), opt.tol, opt.window);
        // a verdict of converged needs the residual check the loop already made
        traj.verdict = v == Verdict::converged ? Verdict::budget_exhausted : v;
    }
    return traj;
}

}  // namespace detail

/// One sampled Q-learning direction at iteration k (the bracket in the update,
/// before the step size). The η term is applied coordinatewise inside the
/// φ(s,a) scaling: direction_i = φ_i(s,a)(δ − ηθ_i).
inline Vector q_learning_direction(const Mdp& mdp, const FeatureMatrix& phi, const SamplerConfig& sampler, double eta,
                                   std::span<const double> theta, std::uint64_t k) {
    const CounterRng rng(sampler.seed);
    const std::size_t pair = detail::sample_index(sampler.d.weights, rng.uniform(k, 0));
    const std::size_t next_state = detail::sample_index(mdp.transition.row(pair), rng.uniform(k, 1));
    const double noise = sampler.reward_noise_halfwidth * (2.0 * rng.uniform(k, 2) - 1.0);
    const double r = mdp.reward[pair] + noise;

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mdp.num_actions; ++a)
        best = std::max(best, dot(phi.features(mdp.index(next_state, a)), theta));
    const auto f = phi.features(pair);
    const double delta = r + mdp.gamma * best - dot(f, theta);
    Vector dir(theta.size());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = f[i] * (delta - eta * theta[i]);
    return dir;
}

inline Trajectory run_q_learning(const Mdp& mdp, const FeatureMatrix& phi, const SamplerConfig& sampler, double eta,
                                 const StepSchedule& schedule, Vector theta0, const RunOptions& opt) {
    validate_mdp(mdp);
    validate_features(mdp, phi);
    validate_distribution(sampler.d, mdp.num_pairs());
    schedule.validate();
    if (!(sampler.reward_noise_halfwidth >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "reward noise halfwidth must be non-negative");
    auto step = [&](std::size_t k, const Vector& theta) {
        const Vector dir = q_learning_direction(mdp, phi, sampler, eta, theta, k);
        const double alpha = schedule(k);
        Vector next = theta;
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += alpha * dir[i];
        return next;
    };
    return detail::iterate(step, greedy_residual_map(mdp, phi, sampler.d, eta), phi, mdp.num_actions,
                           std::move(theta0), opt, sampler.seed);
}

/// Expected-update iteration θ_{k+1} = θ_k + α_k F_η(θ_k, greedy(θ_k), d).
inline Trajectory run_deterministic_q(const Mdp& mdp, const FeatureMatrix& phi, const Distribution& d, double eta,
                                      const StepSchedule& schedule, Vector theta0, const RunOptions& opt) {
    validate_mdp(mdp);
    schedule.validate();
    const auto field = greedy_residual_map(mdp, phi, d, eta);
    auto step = [&](std::size_t k, const Vector& theta) {
        const Vector f = field(theta);
        const double alpha = schedule(k);
        Vector next = theta;
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += alpha * f[i];
        return next;
    };
    return detail::iterate(step, field, phi, mdp.num_actions, std::move(theta0), opt, 0);
}

/// θ_{k+1} = (ΦᵀDΦ + ηI)⁻¹(γΦᵀDPΠ_{greedy(θ_k)}Φθ_k + ΦᵀDR).
inline Trajectory run_avi(const Mdp& mdp, const FeatureMatrix& phi, const Distribution& nu, double eta, Vector theta0,
                          const RunOptions& opt) {
    validate_mdp(mdp);
    validate_features(mdp, phi);
    validate_distribution(nu, mdp.num_pairs());
    const Matrix wt = weighted_transpose(phi, nu);
    const LuFactorization reg(shift_diagonal(wt * phi.phi, eta));
    const Matrix wtp = mdp.gamma * (wt * mdp.transition);
    const Vector b = wt * mdp.reward;
    auto step = [&](std::size_t, const Vector& theta) {
        Vector rhs = wtp * detail::greedy_state_values(phi, theta, mdp.num_actions);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += b[i];
        return reg.solve(rhs);
    };
    return detail::iterate(step, greedy_residual_map(mdp, phi, nu, eta), phi, mdp.num_actions, std::move(theta0),
                           opt, 0);
}

}  // namespace pbelab
