#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "pbelab/dynamics.hpp"
#include "pbelab/epsilon_lab.hpp"
#include "pbelab/error.hpp"
#include "pbelab/pbe.hpp"
#include "pbelab/scenario.hpp"

namespace pbelab {

enum class ExitCode : int { ok = 0, failure = 1, validation = 2, numerical = 3 };

/// Shortest decimal that parses back to exactly `v`, independent of locale.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Writes next to the target and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace detail {

inline void csv_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

inline std::vector<std::string> theta_headers(std::size_t p) {
    std::vector<std::string> h;
    for (std::size_t i = 0; i < p; ++i) h.push_back("theta_" + std::to_string(i));
    return h;
}

inline nlohmann::ordered_json number_json(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

}  // namespace detail

inline std::string certificates_json(const CertificateReport& r) {
    nlohmann::ordered_json j;
    j["snrdd_worst_margin"] = detail::number_json(r.snrdd_worst_margin);
    j["avi_norm_1"] = detail::number_json(r.avi_norm_1);
    j["avi_norm_2"] = detail::number_json(r.avi_norm_2);
    nlohmann::ordered_json rho = nlohmann::ordered_json::object();
    for (const auto& [idx, v] : r.spectral_radius_at) rho[std::to_string(idx)] = detail::number_json(v);
    j["spectral_radius_at"] = rho;
    j["min_eig_gram"] = detail::number_json(r.min_eig_gram);
    j["eta_threshold"] = detail::number_json(r.eta_threshold);
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& c : r.per_policy)
        per.push_back({{"policy_index", c.policy_index},
                       {"snrdd_margin", detail::number_json(c.snrdd_margin)},
                       {"avi_norm_1", detail::number_json(c.avi_norm_1)},
                       {"avi_norm_2", detail::number_json(c.avi_norm_2)},
                       {"spectral_radius", detail::number_json(c.spectral_radius)},
                       {"min_eig_gram", detail::number_json(c.min_eig_gram)}});
    j["per_policy"] = per;
    return j.dump(2) + "\n";
}

inline std::string solutions_csv(const SolutionSet& set, std::size_t p) {
    std::string out;
    std::vector<std::string> head{"policy_index"};
    for (auto& h : detail::theta_headers(p)) head.push_back(h);
    head.insert(head.end(), {"residual_inf", "snrdd_margin", "hurwitz"});
    detail::csv_row(out, head);
    for (const auto& s : set.solutions) {
        std::vector<std::string> row{std::to_string(s.policy_index)};
        for (double t : s.theta) row.push_back(format_number(t));
        row.push_back(format_number(s.residual_inf));
        row.push_back(format_number(s.snrdd_margin));
        row.push_back(s.hurwitz ? "true" : "false");
        detail::csv_row(out, row);
    }
    return out;
}

inline std::string trajectory_csv(const Trajectory& t, std::size_t p) {
    std::string out;
    std::vector<std::string> head{"k"};
    for (auto& h : detail::theta_headers(p)) head.push_back(h);
    head.insert(head.end(), {"residual_inf", "policy_index"});
    detail::csv_row(out, head);
    for (std::size_t i = 0; i < t.thetas.size(); ++i) {
        std::vector<std::string> row{std::to_string(t.steps[i])};
        for (double v : t.thetas[i]) row.push_back(format_number(v));
        row.push_back(format_number(t.residual_inf[i]));
        row.push_back(std::to_string(t.policy_index[i]));
        detail::csv_row(out, row);
    }
    return out;
}

inline std::string trajectory_summary_json(const Trajectory& t) {
    nlohmann::ordered_json j;
    j["verdict"] = std::string(to_string(t.verdict));
    j["iterations"] = t.iterations;
    j["seed"] = t.seed;
    nlohmann::ordered_json theta = nlohmann::ordered_json::array();
    for (double v : t.theta_final) theta.push_back(detail::number_json(v));
    j["theta_final"] = theta;
    j["final_residual_inf"] = detail::number_json(t.residual_inf.back());
    return j.dump(2) + "\n";
}

/// Columns: epsilon, count, stable_count, then per solution (policy_index,
/// theta_0.., stability), padded with empty cells to the widest row.
inline std::string epsilon_scan_csv(const std::vector<EpsilonScanRow>& rows, std::size_t p) {
    std::size_t widest = 0;
    for (const auto& r : rows) widest = std::max(widest, r.count);
    std::string out;
    std::vector<std::string> head{"epsilon", "count", "stable_count"};
    for (std::size_t k = 0; k < widest; ++k) {
        const std::string tag = "sol" + std::to_string(k) + "_";
        head.push_back(tag + "policy_index");
        for (auto& h : detail::theta_headers(p)) head.push_back(tag + h);
        head.push_back(tag + "stability");
    }
    detail::csv_row(out, head);
    for (const auto& r : rows) {
        std::vector<std::string> row{format_number(r.epsilon), std::to_string(r.count), std::to_string(r.stable_count)};
        for (std::size_t k = 0; k < widest; ++k) {
            if (k < r.count) {
                row.push_back(std::to_string(r.solutions[k].policy_index));
                for (double v : r.solutions[k].theta) row.push_back(format_number(v));
                row.push_back(std::string(to_string(r.stability[k])));
            } else {
                row.insert(row.end(), p + 2, "");
            }
        }
        detail::csv_row(out, row);
    }
    return out;
}

/// Runs one command, writes its artifacts to out_dir and returns the exit code.
/// Commands: analyze, solutions, qlearn, detq, avi, scan-epsilon, example, export.
inline int run_command(const std::string& command, const Scenario& sc, const std::filesystem::path& out_dir,
                       std::ostream& err) {
    namespace fs = std::filesystem;
    try {
        validate_scenario(sc);
        fs::create_directories(out_dir);
        const std::size_t p = sc.phi.dim();
        const TargetMode target = sc.algorithms.target_mode;
        if (command == "analyze") {
            write_file_atomic(out_dir / "certificates.json",
                              certificates_json(certificate_report(sc.mdp, sc.phi, nu_mode(sc), AllDeterministic{},
                                                                   sc.eta, target)));
        } else if (command == "solutions") {
            write_file_atomic(out_dir / "solutions.csv",
                              solutions_csv(enumerate_pbe_solutions(sc.mdp, sc.phi, nu_mode(sc), sc.eta,
                                                                    AllDeterministic{}, target),
                                            p));
        } else if (command == "qlearn" || command == "detq" || command == "avi") {
            const Distribution d = simulation_distribution(sc);
            Trajectory t;
            if (command == "qlearn")
                t = run_q_learning(sc.mdp, sc.phi, {d, sc.algorithms.reward_noise_halfwidth, sc.algorithms.seed},
                                   sc.eta, sc.algorithms.schedule, initial_theta(sc), run_options(sc));
            else if (command == "detq")
                t = run_deterministic_q(sc.mdp, sc.phi, d, sc.eta, sc.algorithms.schedule, initial_theta(sc),
                                        run_options(sc));
            else
                t = run_avi(sc.mdp, sc.phi, d, sc.eta, initial_theta(sc), run_options(sc));
            write_file_atomic(out_dir / "trajectory.csv", trajectory_csv(t, p));
            write_file_atomic(out_dir / "trajectory_summary.json", trajectory_summary_json(t));
        } else if (command == "scan-epsilon") {
            const auto& g = sc.algorithms.eps_grid;
            write_file_atomic(out_dir / "epsilon_scan.csv",
                              epsilon_scan_csv(scan_epsilon(sc.mdp, sc.phi, epsilon_grid(g.start, g.stop, g.count),
                                                            sc.eta, target),
                                               p));
        } else if (command == "example") {
            const int rc = run_command("analyze", sc, out_dir, err);
            return rc != 0 ? rc : run_command("solutions", sc, out_dir, err);
        } else if (command == "export") {
            write_file_atomic(out_dir / ((sc.name.empty() ? std::string("scenario") : sc.name) + ".json"),
                              scenario_to_json(sc));
        } else {
            err << "unknown command '" << command << "'\n";
            return static_cast<int>(ExitCode::validation);
        }
        return static_cast<int>(ExitCode::ok);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.numerical() ? ExitCode::numerical : ExitCode::validation);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::failure);
    }
}

}  // namespace pbelab
