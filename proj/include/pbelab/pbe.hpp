#pragma once

// Projected Bellman equation under linear features:
//
//   F_η(θ) = ΦᵀD_ν R + T(θ,π,ν)θ − ηθ,   T = γΦᵀD_ν P Π_π Φ − ΦᵀD_ν Φ.
//
// The greedy target makes Π_π piecewise constant in θ, so every question about
// the equation (solutions, certificates) reduces to a finite sweep over the
// deterministic policies.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pbelab/error.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/numerics.hpp"
#include "pbelab/rng.hpp"

namespace pbelab {

struct FixedNu {
    Distribution d;
};
struct StationaryNu {
    Policy behavior;
};
/// ν is the stationary distribution of the ε-greedy version of the candidate policy.
struct OnPolicyEpsNu {
    double epsilon;
};
using NuMode = std::variant<FixedNu, StationaryNu, OnPolicyEpsNu>;

/// Which policy sits in the target position of T for a greedy candidate π.
/// eps_greedy uses the ε of an OnPolicyEpsNu mode.
enum class TargetMode { greedy, eps_greedy };

struct AllDeterministic {};
using PolicySet = std::variant<AllDeterministic, std::vector<Policy>>;

inline constexpr std::size_t kMaxEnumeratedPolicies = 4096;

struct TOperator {
    Matrix matrix;
    Policy pi;
    Distribution nu;
};

/// Projected pieces for one (π, ν): gram = ΦᵀDΦ, next = ΦᵀDPΠΦ, b = ΦᵀDR.
struct ProjectedSystem {
    Matrix gram;
    Matrix next;
    Vector b;
};

inline Matrix weighted_transpose(const FeatureMatrix& phi, const Distribution& nu) {
    Matrix out = phi.phi.transpose();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= nu[j];
    return out;
}

inline ProjectedSystem project(const Mdp& mdp, const FeatureMatrix& phi, const Policy& pi, const Distribution& nu) {
    validate_features(mdp, phi);
    validate_distribution(nu, mdp.num_pairs());
    validate_policy(pi, mdp.num_states, mdp.num_actions);
    const Matrix wt = weighted_transpose(phi, nu);  // ΦᵀD
    return {wt * phi.phi, wt * (mdp.transition * (policy_matrix(pi) * phi.phi)), wt * mdp.reward};
}

inline Matrix t_operator_matrix(const ProjectedSystem& sys, double gamma) {
    return gamma * sys.next - sys.gram;
}

inline TOperator t_matrix(const Mdp& mdp, const FeatureMatrix& phi, const Policy& pi, const Distribution& nu) {
    return {t_operator_matrix(project(mdp, phi, pi, nu), mdp.gamma), pi, nu};
}

/// F_η(θ) for a fixed target policy; η = 0 gives the unregularized equation.
inline Vector pbe_residual(const Mdp& mdp, const FeatureMatrix& phi, std::span<const double> theta,
                           const Policy& pi, const Distribution& nu, double eta) {
    const ProjectedSystem sys = project(mdp, phi, pi, nu);
    Vector f = t_operator_matrix(sys, mdp.gamma) * theta;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += sys.b[i] - eta * theta[i];
    return f;
}

/// max_i S_i(A) with S_i = a_ii + Σ_{j≠i} |a_ij|; A is SNRDD iff the result is negative.
inline double snrdd_margin(const Matrix& a) {
    if (!a.square()) throw Error(ErrorKind::InvalidArgument, "snrdd_margin needs a square matrix");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = a(i, i);
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (j != i) s += std::abs(a(i, j));
        worst = std::max(worst, s);
    }
    return worst;
}

inline Matrix shift_diagonal(Matrix a, double shift) {
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += shift;
    return a;
}

/// θᵖ = (ΦᵀDΦ + ηI − γΦᵀDPΠΦ)⁻¹ΦᵀDR.
inline Vector td_fixed_point(const Mdp& mdp, const FeatureMatrix& phi, const Policy& pi, const Distribution& nu,
                             double eta) {
    const ProjectedSystem sys = project(mdp, phi, pi, nu);
    // subtract per pair before weighting; near-singular systems lose far fewer digits this way
    Matrix td = mdp.transition * (policy_matrix(pi) * phi.phi);
    for (std::size_t i = 0; i < td.rows(); ++i)
        for (std::size_t j = 0; j < td.cols(); ++j) td(i, j) = phi.phi(i, j) - mdp.gamma * td(i, j);
    const Matrix a = shift_diagonal(weighted_transpose(phi, nu) * td, eta);
    const double terms = std::max(max_abs(sys.gram.data()) + std::abs(eta), mdp.gamma * max_abs(sys.next.data()));
    return LuFactorization(a, terms).solve(sys.b);
}

inline Distribution resolve_nu(const Mdp& mdp, const NuMode& mode, const Policy& candidate) {
    return std::visit(
        [&](const auto& m) -> Distribution {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, FixedNu>) {
                validate_distribution(m.d, mdp.num_pairs());
                return m.d;
            } else if constexpr (std::is_same_v<M, StationaryNu>) {
                return {stationary_distribution(chain_matrix(mdp, m.behavior))};
            } else {
                if (!(m.epsilon > 0.0 && m.epsilon < 1.0))
                    throw Error(ErrorKind::InvalidArgument, "on-policy epsilon must lie in (0,1)");
                return {stationary_distribution(chain_matrix(mdp, epsilon_greedy_of(candidate, m.epsilon)))};
            }
        },
        mode);
}

/// Target policy placed in T for a deterministic candidate.
inline Policy target_policy(const Policy& candidate, TargetMode target, const NuMode& mode) {
    if (target == TargetMode::greedy) return candidate;
    const auto* eps = std::get_if<OnPolicyEpsNu>(&mode);
    if (eps == nullptr)
        throw Error(ErrorKind::InvalidArgument, "eps-greedy target needs an on-policy epsilon sampling mode");
    return epsilon_greedy_of(candidate, eps->epsilon);
}

inline std::size_t deterministic_policy_count(std::size_t num_states, std::size_t num_actions) {
    std::size_t count = 1;
    for (std::size_t s = 0; s < num_states; ++s) {
        if (count > kMaxEnumeratedPolicies / num_actions + 1) return kMaxEnumeratedPolicies + 1;
        count *= num_actions;
    }
    return count;
}

inline std::vector<Policy> resolve_policy_set(const Mdp& mdp, const PolicySet& set) {
    if (const auto* list = std::get_if<std::vector<Policy>>(&set)) {
        for (const auto& p : *list) validate_policy(p, mdp.num_states, mdp.num_actions);
        return *list;
    }
    const std::size_t count = deterministic_policy_count(mdp.num_states, mdp.num_actions);
    if (count > kMaxEnumeratedPolicies)
        throw Error(ErrorKind::PolicySpaceTooLarge,
                    "|A|^|S| exceeds " + std::to_string(kMaxEnumeratedPolicies) + "; pass an explicit policy list");
    std::vector<Policy> out;
    out.reserve(count);
    for (std::size_t idx = 1; idx <= count; ++idx)
        out.push_back(Policy::deterministic(policy_actions(idx, mdp.num_states, mdp.num_actions), mdp.num_actions));
    return out;
}

enum class Stability { stable, unstable };

inline std::string_view to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

inline bool is_hurwitz(const Matrix& a) {
    const EigenSpectrum spec = eigenvalues(a);
    if (!spec.converged) throw Error(ErrorKind::NoConvergence, "QR iteration did not converge");
    return spec.max_real_part() < -Tolerances::hurwitz;
}

/// Stable iff T(θ*, greedy(θ*), ν) − ηI is Hurwitz.
inline Stability classify_stability(const Mdp& mdp, const FeatureMatrix& phi, std::span<const double> theta_star,
                                    const Distribution& nu, double eta = 0.0,
                                    TargetMode target = TargetMode::greedy, double target_epsilon = 0.0) {
    Policy pi = greedy_policy(phi, theta_star, mdp.num_actions);
    if (target == TargetMode::eps_greedy) pi = epsilon_greedy_of(pi, target_epsilon);
    const Matrix jac = shift_diagonal(t_matrix(mdp, phi, pi, nu).matrix, -eta);
    return is_hurwitz(jac) ? Stability::stable : Stability::unstable;
}

struct PbeSolution {
    Vector theta;
    Policy policy;                // greedy(θ) under the lowest-index tie-break
    std::size_t policy_index = 0;  // candidate whose fixed point this is (1-based)
    Distribution nu;
    double residual_inf = 0.0;
    double snrdd_margin = 0.0;  // of T − ηI at θ
    bool hurwitz = false;
    double eta = 0.0;
};

struct SkippedPolicy {
    std::size_t policy_index;
    std::string reason;
};

struct SolutionSet {
    std::vector<PbeSolution> solutions;
    std::vector<SkippedPolicy> skipped;
};

/// True when each state's candidate action lies in the tolerant argmax set of Φθ.
inline bool greedy_consistent(const FeatureMatrix& phi, std::span<const double> theta, const Policy& candidate) {
    const std::size_t na = candidate.num_actions();
    const Vector q = action_values(phi, theta);
    for (std::size_t s = 0; s < candidate.num_states(); ++s) {
        const auto best = argmax_set(std::span<const double>(q).subspan(s * na, na));
        if (std::find(best.begin(), best.end(), candidate.action(s)) == best.end()) return false;
    }
    return true;
}

/// Every θ solving F_η(θ, greedy(θ), ν) = 0, found by solving the linear
/// fixed point of each deterministic candidate and keeping the self-consistent ones.
inline SolutionSet enumerate_pbe_solutions(const Mdp& mdp, const FeatureMatrix& phi, const NuMode& nu_mode,
                                           double eta, const PolicySet& candidates = AllDeterministic{},
                                           TargetMode target = TargetMode::greedy) {
    validate_mdp(mdp);
    validate_features(mdp, phi);
    SolutionSet out;
    for (const Policy& raw : resolve_policy_set(mdp, candidates)) {
        const Policy candidate = Policy::deterministic(
            [&] {
                std::vector<std::size_t> a(raw.num_states());
                for (std::size_t s = 0; s < a.size(); ++s) a[s] = raw.action(s);
                return a;
            }(),
            mdp.num_actions);
        const std::size_t index = policy_index(candidate);
        Distribution nu;
        Vector theta;
        try {
            nu = resolve_nu(mdp, nu_mode, candidate);
            theta = td_fixed_point(mdp, phi, target_policy(candidate, target, nu_mode), nu, eta);
        } catch (const Error& e) {
            if (!e.numerical()) throw;
            out.skipped.push_back({index, e.what()});
            continue;
        }
        if (!greedy_consistent(phi, theta, candidate)) continue;

        PbeSolution sol;
        sol.policy = greedy_policy(phi, theta, mdp.num_actions);
        const Policy tgt = target_policy(sol.policy, target, nu_mode);
        sol.theta = theta;
        sol.policy_index = index;
        sol.residual_inf = max_abs(pbe_residual(mdp, phi, theta, tgt, nu, eta));
        const Matrix jac = shift_diagonal(t_matrix(mdp, phi, tgt, nu).matrix, -eta);
        sol.snrdd_margin = snrdd_margin(jac);
        sol.hurwitz = is_hurwitz(jac);
        sol.eta = eta;
        sol.nu = std::move(nu);
        out.solutions.push_back(std::move(sol));
    }
    return out;
}

struct PolicyCertificate {
    std::size_t policy_index = 0;
    double snrdd_margin = 0.0;     // T − ηI
    double t_margin = 0.0;         // T alone
    double avi_norm_1 = 0.0;       // γ‖Φ(ΦᵀDΦ+ηI)⁻¹ΦᵀDPΠ‖∞
    double avi_norm_2 = 0.0;       // γ‖(ΦᵀDΦ+ηI)⁻¹ΦᵀDPΠΦ‖∞
    double spectral_radius = 0.0;  // of γ(ΦᵀDΦ+ηI)⁻¹ΦᵀDPΠΦ
    double min_eig_gram = 0.0;     // λ_min(ΦᵀDΦ)
};

struct CertificateReport {
    double snrdd_worst_margin = 0.0;
    double avi_norm_1 = 0.0;
    double avi_norm_2 = 0.0;
    std::map<std::size_t, double> spectral_radius_at;
    double min_eig_gram = 0.0;
    double eta_threshold = 0.0;
    std::vector<PolicyCertificate> per_policy;
};

inline PolicyCertificate certify_policy(const Mdp& mdp, const FeatureMatrix& phi, const Policy& target,
                                        const Distribution& nu, double eta) {
    const ProjectedSystem sys = project(mdp, phi, target, nu);
    PolicyCertificate c;
    c.policy_index = policy_index(target);
    const Matrix t = t_operator_matrix(sys, mdp.gamma);
    c.t_margin = snrdd_margin(t);
    c.snrdd_margin = c.t_margin - eta;
    c.min_eig_gram = min_symmetric_eigenvalue(sys.gram);

    const LuFactorization reg(shift_diagonal(sys.gram, eta));
    const Matrix avi = mdp.gamma * reg.solve(sys.next);
    c.avi_norm_2 = infinity_norm(avi);
    const EigenSpectrum spec = eigenvalues(avi);
    if (!spec.converged) throw Error(ErrorKind::NoConvergence, "QR iteration did not converge");
    c.spectral_radius = spec.spectral_radius();

    const Matrix wt = weighted_transpose(phi, nu);
    const Matrix lifted = phi.phi * reg.solve(wt * (mdp.transition * policy_matrix(target)));
    c.avi_norm_1 = mdp.gamma * infinity_norm(lifted);
    return c;
}

/// Existence/uniqueness certificates maximized over a policy set.
inline CertificateReport certificate_report(const Mdp& mdp, const FeatureMatrix& phi, const NuMode& nu_mode,
                                            const PolicySet& policy_set, double eta,
                                            TargetMode target = TargetMode::greedy) {
    validate_mdp(mdp);
    validate_features(mdp, phi);
    CertificateReport r;
    r.snrdd_worst_margin = r.avi_norm_1 = r.avi_norm_2 = r.eta_threshold = -std::numeric_limits<double>::infinity();
    r.min_eig_gram = std::numeric_limits<double>::infinity();
    for (const Policy& pi : resolve_policy_set(mdp, policy_set)) {
        const Distribution nu = resolve_nu(mdp, nu_mode, pi);
        PolicyCertificate c = certify_policy(mdp, phi, target_policy(pi, target, nu_mode), nu, eta);
        c.policy_index = policy_index(pi);
        r.snrdd_worst_margin = std::max(r.snrdd_worst_margin, c.snrdd_margin);
        r.eta_threshold = std::max(r.eta_threshold, c.t_margin);
        r.avi_norm_1 = std::max(r.avi_norm_1, c.avi_norm_1);
        r.avi_norm_2 = std::max(r.avi_norm_2, c.avi_norm_2);
        r.min_eig_gram = std::min(r.min_eig_gram, c.min_eig_gram);
        r.spectral_radius_at[c.policy_index] = c.spectral_radius;
        r.per_policy.push_back(c);
    }
    return r;
}

struct EtaThreshold {
    double value = 0.0;            // any η strictly above makes every T − ηI SNRDD
    bool scaled_features = false;  // ‖φ(s,a)‖∞ ≤ 1/√p for all pairs
};

inline bool features_scaled(const FeatureMatrix& phi) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(phi.dim()));
    return max_abs(phi.phi.data()) <= bound;
}

inline EtaThreshold eta_threshold(const Mdp& mdp, const FeatureMatrix& phi, const NuMode& nu_mode,
                                  const PolicySet& policy_set, TargetMode target = TargetMode::greedy) {
    validate_mdp(mdp);
    validate_features(mdp, phi);
    EtaThreshold out{-std::numeric_limits<double>::infinity(), features_scaled(phi)};
    for (const Policy& pi : resolve_policy_set(mdp, policy_set)) {
        const Distribution nu = resolve_nu(mdp, nu_mode, pi);
        out.value = std::max(out.value, snrdd_margin(t_matrix(mdp, phi, target_policy(pi, target, nu_mode), nu).matrix));
    }
    return out;
}

/// θ ↦ F_η(θ, greedy(θ), ν): the mean field of every Q-learning variant here.
inline std::function<Vector(std::span<const double>)> greedy_residual_map(const Mdp& mdp, const FeatureMatrix& phi,
                                                                          const Distribution& nu, double eta) {
    validate_features(mdp, phi);
    validate_distribution(nu, mdp.num_pairs());
    const Matrix wt = weighted_transpose(phi, nu);
    const Matrix gram = wt * phi.phi;
    const Vector b = wt * mdp.reward;
    const Matrix wtp = mdp.gamma * (wt * mdp.transition);  // γΦᵀDP, p × |S|
    return [=, na = mdp.num_actions, ns = mdp.num_states](std::span<const double> theta) {
        const Vector q = action_values(phi, theta);
        Vector vmax(ns);
        for (std::size_t s = 0; s < ns; ++s)
            vmax[s] = q[s * na + argmax_set(std::span<const double>(q).subspan(s * na, na)).front()];
        Vector f = wtp * vmax;
        const Vector g = gram * theta;
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += b[i] - g[i] - eta * theta[i];
        return f;
    };
}

/// Largest observed [f(x)−f(y)]_i[x−y]_i / ‖x−y‖∞² over seeded random pairs in
/// [−radius, radius]^dim, with i ranging over the coordinates attaining ‖x−y‖∞.
inline double one_sided_lipschitz_estimate(const std::function<Vector(std::span<const double>)>& f,
                                           std::size_t dimension, std::size_t num_pairs, double sample_radius,
                                           std::uint64_t seed) {
    if (num_pairs == 0) throw Error(ErrorKind::InvalidArgument, "num_pairs must be at least 1");
    const CounterRng rng(seed);
    double best = -std::numeric_limits<double>::infinity();
    Vector x(dimension), y(dimension);
    for (std::size_t k = 0; k < num_pairs; ++k) {
        for (std::size_t i = 0; i < dimension; ++i) {
            x[i] = sample_radius * (2.0 * rng.uniform(k, static_cast<std::uint32_t>(2 * i)) - 1.0);
            y[i] = sample_radius * (2.0 * rng.uniform(k, static_cast<std::uint32_t>(2 * i + 1)) - 1.0);
        }
        const double gap = distance_inf(x, y);
        if (gap == 0.0) continue;
        const Vector fx = f(x), fy = f(y);
        for (std::size_t i = 0; i < dimension; ++i) {
            if (std::abs(x[i] - y[i]) != gap) continue;
            best = std::max(best, (fx[i] - fy[i]) * (x[i] - y[i]) / (gap * gap));
        }
    }
    return best;
}

}  // namespace pbelab
