#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbelab/dynamics.hpp"
#include "pbelab/epsilon_lab.hpp"
#include "pbelab/error.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/pbe.hpp"

namespace pbelab {

struct EpsGridSpec {
    double start = 0.005;
    double stop = 0.995;
    std::size_t count = 200;

    friend bool operator==(const EpsGridSpec&, const EpsGridSpec&) = default;
};

struct AlgorithmParams {
    StepSchedule schedule = StepSchedule::robbins_monro(2.0, 10.0);
    std::size_t max_iter = 100000;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::size_t stride = 100;
    std::size_t window = 5;
    EpsGridSpec eps_grid;
    TargetMode target_mode = TargetMode::greedy;
    std::optional<Vector> theta0;
    double reward_noise_halfwidth = 0.0;

    friend bool operator==(const AlgorithmParams&, const AlgorithmParams&) = default;
};

/// Everything one run needs. Exactly one of behavior, sampling and
/// on_policy_epsilon supplies the weighting distribution ν.
struct Scenario {
    std::string name;
    Mdp mdp;
    FeatureMatrix phi;
    std::optional<Policy> behavior;
    std::optional<Distribution> sampling;
    std::optional<double> on_policy_epsilon;
    double eta = 0.0;
    AlgorithmParams algorithms;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline NuMode nu_mode(const Scenario& sc) {
    if (sc.behavior) return StationaryNu{*sc.behavior};
    if (sc.sampling) return FixedNu{*sc.sampling};
    if (sc.on_policy_epsilon) return OnPolicyEpsNu{*sc.on_policy_epsilon};
    throw Error(ErrorKind::ValidationError, "scenario has no behavior, sampling or on_policy_epsilon");
}

/// Fixed distribution used by the simulators (they need ν independent of θ).
inline Distribution simulation_distribution(const Scenario& sc) {
    if (sc.sampling) return *sc.sampling;
    if (sc.behavior) return {stationary_distribution(chain_matrix(sc.mdp, *sc.behavior))};
    throw Error(ErrorKind::ValidationError, "simulators need a behavior policy or a sampling distribution");
}

inline RunOptions run_options(const Scenario& sc) {
    return {sc.algorithms.max_iter, sc.algorithms.tol, sc.algorithms.stride, sc.algorithms.window};
}

inline Vector initial_theta(const Scenario& sc) {
    return sc.algorithms.theta0 ? *sc.algorithms.theta0 : Vector(sc.phi.dim(), 0.0);
}

/// Checks every invariant; violations surface as ValidationError naming the inner kind.
inline void validate_scenario(const Scenario& sc) {
    try {
        validate_mdp(sc.mdp);
        validate_features(sc.mdp, sc.phi);
        const int sources = int(sc.behavior.has_value()) + int(sc.sampling.has_value()) +
                            int(sc.on_policy_epsilon.has_value());
        if (sources != 1)
            throw Error(ErrorKind::ValidationError,
                        "exactly one of behavior, sampling, on_policy_epsilon must be given (found " +
                            std::to_string(sources) + ")");
        if (sc.behavior) validate_policy(*sc.behavior, sc.mdp.num_states, sc.mdp.num_actions);
        if (sc.sampling) validate_distribution(*sc.sampling, sc.mdp.num_pairs());
        if (sc.on_policy_epsilon && !(*sc.on_policy_epsilon > 0.0 && *sc.on_policy_epsilon < 1.0))
            throw Error(ErrorKind::InvalidArgument, "on_policy_epsilon must lie in (0,1)");
        if (!(sc.eta >= 0.0) || !std::isfinite(sc.eta)) throw Error(ErrorKind::InvalidArgument, "eta must be >= 0");
        const AlgorithmParams& al = sc.algorithms;
        al.schedule.validate();
        if (al.max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be at least 1");
        if (!(al.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
        if (al.stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be at least 1");
        if (al.window < 2) throw Error(ErrorKind::InvalidArgument, "window must be at least 2");
        if (!(al.reward_noise_halfwidth >= 0.0))
            throw Error(ErrorKind::InvalidArgument, "reward_noise_halfwidth must be >= 0");
        (void)epsilon_grid(al.eps_grid.start, al.eps_grid.stop, al.eps_grid.count);
        if (al.theta0 && al.theta0->size() != sc.phi.dim())
            throw Error(ErrorKind::InvalidArgument, "theta0 length must equal the feature dimension");
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ValidationError || e.numerical()) throw;
        throw Error(ErrorKind::ValidationError, e.what());
    }
}

inline std::string_view to_string(TargetMode m) { return m == TargetMode::greedy ? "greedy" : "eps-greedy"; }

inline TargetMode parse_target_mode(std::string_view s) {
    if (s == "greedy") return TargetMode::greedy;
    if (s == "eps-greedy" || s == "eps_greedy") return TargetMode::eps_greedy;
    throw Error(ErrorKind::ParseError, "target mode must be greedy or eps-greedy, got '" + std::string(s) + "'");
}

namespace detail {

using Json = nlohmann::ordered_json;

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw Error(ErrorKind::ParseError, "unknown field '" + where + it.key() + "'");
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw Error(ErrorKind::ParseError, "missing field '" + where + key + "'");
    return obj.at(key);
}

inline double number(const Json& v, const std::string& field) {
    if (!v.is_number()) throw Error(ErrorKind::ParseError, "field '" + field + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t unsigned_integer(const Json& v, const std::string& field) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw Error(ErrorKind::ParseError, "field '" + field + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline Vector numbers(const Json& v, const std::string& field, std::size_t expected) {
    if (!v.is_array()) throw Error(ErrorKind::ParseError, "field '" + field + "' must be an array of numbers");
    Vector out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    if (expected != 0 && out.size() != expected)
        throw Error(ErrorKind::ParseError, "field '" + field + "' has " + std::to_string(out.size()) +
                                               " entries, expected " + std::to_string(expected));
    return out;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) line += text[i] == '\n';
    return line;
}

inline AlgorithmParams parse_algorithms(const Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "field 'algorithms' must be an object");
    reject_unknown(j,
                   {"schedule", "max_iter", "tol", "seed", "stride", "window", "eps_grid", "target_mode", "theta0",
                    "reward_noise_halfwidth"},
                   "algorithms.");
    AlgorithmParams al;
    if (j.contains("schedule")) {
        const Json& s = j.at("schedule");
        if (!s.is_object()) throw Error(ErrorKind::ParseError, "field 'algorithms.schedule' must be an object");
        reject_unknown(s, {"kind", "a", "b", "alpha"}, "algorithms.schedule.");
        const Json& kind = require(s, "kind", "algorithms.schedule.");
        if (!kind.is_string()) throw Error(ErrorKind::ParseError, "field 'algorithms.schedule.kind' must be a string");
        if (kind == "robbins_monro") {
            al.schedule = StepSchedule::robbins_monro(
                s.contains("a") ? number(s.at("a"), "algorithms.schedule.a") : 2.0,
                s.contains("b") ? number(s.at("b"), "algorithms.schedule.b") : 10.0);
        } else if (kind == "constant") {
            al.schedule = StepSchedule::constant(number(require(s, "alpha", "algorithms.schedule."),
                                                        "algorithms.schedule.alpha"));
        } else {
            throw Error(ErrorKind::ParseError,
                        "field 'algorithms.schedule.kind' must be robbins_monro or constant");
        }
    }
    if (j.contains("max_iter")) al.max_iter = unsigned_integer(j.at("max_iter"), "algorithms.max_iter");
    if (j.contains("tol")) al.tol = number(j.at("tol"), "algorithms.tol");
    if (j.contains("seed")) al.seed = unsigned_integer(j.at("seed"), "algorithms.seed");
    if (j.contains("stride")) al.stride = unsigned_integer(j.at("stride"), "algorithms.stride");
    if (j.contains("window")) al.window = unsigned_integer(j.at("window"), "algorithms.window");
    if (j.contains("eps_grid")) {
        const Json& g = j.at("eps_grid");
        if (!g.is_object()) throw Error(ErrorKind::ParseError, "field 'algorithms.eps_grid' must be an object");
        reject_unknown(g, {"start", "stop", "count"}, "algorithms.eps_grid.");
        if (g.contains("start")) al.eps_grid.start = number(g.at("start"), "algorithms.eps_grid.start");
        if (g.contains("stop")) al.eps_grid.stop = number(g.at("stop"), "algorithms.eps_grid.stop");
        if (g.contains("count")) al.eps_grid.count = unsigned_integer(g.at("count"), "algorithms.eps_grid.count");
    }
    if (j.contains("target_mode")) {
        const Json& t = j.at("target_mode");
        if (!t.is_string()) throw Error(ErrorKind::ParseError, "field 'algorithms.target_mode' must be a string");
        al.target_mode = parse_target_mode(t.get<std::string>());
    }
    if (j.contains("theta0")) al.theta0 = numbers(j.at("theta0"), "algorithms.theta0", 0);
    if (j.contains("reward_noise_halfwidth"))
        al.reward_noise_halfwidth = number(j.at("reward_noise_halfwidth"), "algorithms.reward_noise_halfwidth");
    return al;
}

}  // namespace detail

/// Parses scenario JSON text; `source` names the input in diagnostics.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<string>") {
    using detail::Json;
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError,
                    source + ":" + std::to_string(detail::line_of(text, e.byte)) + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw Error(ErrorKind::ParseError, source + ": top level must be an object");
    try {
        detail::reject_unknown(j,
                               {"name", "num_states", "num_actions", "gamma", "transition", "reward", "phi",
                                "behavior", "sampling", "on_policy_epsilon", "eta", "algorithms"},
                               "");
        Scenario sc;
        if (j.contains("name")) {
            if (!j.at("name").is_string()) throw Error(ErrorKind::ParseError, "field 'name' must be a string");
            sc.name = j.at("name").get<std::string>();
        }
        const std::size_t ns = detail::unsigned_integer(detail::require(j, "num_states", ""), "num_states");
        const std::size_t na = detail::unsigned_integer(detail::require(j, "num_actions", ""), "num_actions");
        if (ns == 0 || na == 0) throw Error(ErrorKind::ParseError, "num_states and num_actions must be positive");
        const std::size_t pairs = ns * na;
        sc.mdp.num_states = ns;
        sc.mdp.num_actions = na;
        sc.mdp.gamma = detail::number(detail::require(j, "gamma", ""), "gamma");
        sc.mdp.transition = Matrix(pairs, ns, detail::numbers(detail::require(j, "transition", ""), "transition", pairs * ns));
        sc.mdp.reward = detail::numbers(detail::require(j, "reward", ""), "reward", pairs);
        const Vector phi = detail::numbers(detail::require(j, "phi", ""), "phi", 0);
        if (phi.empty() || phi.size() % pairs != 0)
            throw Error(ErrorKind::ParseError, "field 'phi' length must be a positive multiple of num_states*num_actions");
        sc.phi.phi = Matrix(pairs, phi.size() / pairs, phi);
        if (j.contains("behavior"))
            sc.behavior = Policy{PolicyKind::stochastic,
                                 Matrix(ns, na, detail::numbers(j.at("behavior"), "behavior", ns * na))};
        if (j.contains("sampling")) sc.sampling = Distribution{detail::numbers(j.at("sampling"), "sampling", pairs)};
        if (j.contains("on_policy_epsilon"))
            sc.on_policy_epsilon = detail::number(j.at("on_policy_epsilon"), "on_policy_epsilon");
        if (j.contains("eta")) sc.eta = detail::number(j.at("eta"), "eta");
        if (j.contains("algorithms")) sc.algorithms = detail::parse_algorithms(j.at("algorithms"));
        validate_scenario(sc);
        return sc;
    } catch (const Error& e) {
        throw Error(e.kind(), source + ": " + std::string(e.what()).substr(to_string(e.kind()).size() + 2));
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ParseError, path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

inline std::string scenario_to_json(const Scenario& sc) {
    using detail::Json;
    Json j;
    j["name"] = sc.name;
    j["num_states"] = sc.mdp.num_states;
    j["num_actions"] = sc.mdp.num_actions;
    j["gamma"] = sc.mdp.gamma;
    j["transition"] = sc.mdp.transition.data();
    j["reward"] = sc.mdp.reward;
    j["phi"] = sc.phi.phi.data();
    if (sc.behavior) j["behavior"] = sc.behavior->table.data();
    if (sc.sampling) j["sampling"] = sc.sampling->weights;
    if (sc.on_policy_epsilon) j["on_policy_epsilon"] = *sc.on_policy_epsilon;
    j["eta"] = sc.eta;
    const AlgorithmParams& al = sc.algorithms;
    Json a;
    if (al.schedule.kind == StepSchedule::Kind::robbins_monro)
        a["schedule"] = {{"kind", "robbins_monro"}, {"a", al.schedule.a}, {"b", al.schedule.b}};
    else
        a["schedule"] = {{"kind", "constant"}, {"alpha", al.schedule.alpha}};
    a["max_iter"] = al.max_iter;
    a["tol"] = al.tol;
    a["seed"] = al.seed;
    a["stride"] = al.stride;
    a["window"] = al.window;
    a["eps_grid"] = {{"start", al.eps_grid.start}, {"stop", al.eps_grid.stop}, {"count", al.eps_grid.count}};
    a["target_mode"] = std::string(to_string(al.target_mode));
    if (al.theta0) a["theta0"] = *al.theta0;
    a["reward_noise_halfwidth"] = al.reward_noise_halfwidth;
    j["algorithms"] = a;
    return j.dump(2) + "\n";
}

namespace detail {

inline Scenario two_by_two(std::string name, Matrix phi, Matrix transition, Vector reward, double b1, double b2) {
    Scenario sc;
    sc.name = std::move(name);
    sc.mdp = {2, 2, std::move(transition), std::move(reward), 0.99};
    sc.phi = {std::move(phi)};
    sc.behavior = Policy{PolicyKind::stochastic, Matrix{{b1, 1.0 - b1}, {b2, 1.0 - b2}}};
    return sc;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"ex1", "ex2", "ex3", "epsF1", "epsF2"};
    return names;
}

/// Example problems with two states and two actions (ex1 to ex3) and the
/// one-state ε-greedy problems (epsF1, epsF2). Discount 0.99 throughout.
inline Scenario builtin_scenario(const std::string& name) {
    if (name == "ex1")
        return detail::two_by_two("ex1", Matrix{{0.34, -0.59}, {0.25, -0.16}, {-0.92, 0.37}, {0.83, 0.19}},
                                  Matrix{{0.0, 1.0}, {0.02, 0.98}, {0.99, 0.01}, {0.05, 0.95}},
                                  Vector{0.3, -0.47, -0.87, -1.0}, 0.96, 0.19);
    if (name == "ex2")
        return detail::two_by_two("ex2", Matrix{{0.37, 0.99}, {0.97, 1.0}, {-1.0, -0.95}, {-0.77, 0.19}},
                                  Matrix{{0.99, 0.01}, {0.99, 0.01}, {0.89, 0.11}, {0.42, 0.58}},
                                  Vector{-0.31, -0.46, -0.35, 0.73}, 0.59, 0.98);
    if (name == "ex3")
        return detail::two_by_two("ex3", Matrix{{0.13, 0.09}, {1.0, 0.84}, {-0.59, 0.64}, {-0.94, -0.28}},
                                  Matrix{{0.99, 0.01}, {0.37, 0.63}, {0.99, 0.01}, {0.99, 0.01}},
                                  Vector{-0.48, 0.48, 0.41, 0.18}, 0.98, 0.96);
    if (name == "epsF1" || name == "epsF2") {
        Scenario sc;
        sc.name = name;
        const bool f1 = name == "epsF1";
        sc.mdp = {1, 2, Matrix{{1.0}, {1.0}}, f1 ? Vector{0.5, -0.78} : Vector{-0.1, -0.78}, 0.99};
        sc.phi = {f1 ? Matrix{{0.45}, {0.79}} : Matrix{{0.5}, {1.0}}};
        sc.on_policy_epsilon = f1 ? 0.5 : 0.1;
        sc.algorithms.target_mode = f1 ? TargetMode::eps_greedy : TargetMode::greedy;
        return sc;
    }
    throw Error(ErrorKind::ValidationError, "unknown builtin '" + name + "'");
}

}  // namespace pbelab
