// Walks the three two-state examples: solutions, certificates, and how
// deterministic Q-learning and AVI behave from the origin.
#include <cstdio>

#include "pbelab/pbelab.hpp"

using namespace pbelab;

int main() {
    for (const char* name : {"ex1", "ex2", "ex3"}) {
        const Scenario sc = builtin_scenario(name);
        const NuMode mode = nu_mode(sc);
        const Distribution d = simulation_distribution(sc);
        std::printf("== %s (gamma %.2f)\n", name, sc.mdp.gamma);

        const SolutionSet set = enumerate_pbe_solutions(sc.mdp, sc.phi, mode, 0.0);
        for (const auto& s : set.solutions)
            std::printf("  solution policy %zu  theta = (%.4f, %.4f)  margin %.4f  %s\n", s.policy_index, s.theta[0],
                        s.theta[1], s.snrdd_margin, s.hurwitz ? "hurwitz" : "not hurwitz");

        const CertificateReport rep = certificate_report(sc.mdp, sc.phi, mode, AllDeterministic{}, 0.0);
        std::printf("  worst snrdd margin %.4f  avi norms %.4f / %.4f\n", rep.snrdd_worst_margin, rep.avi_norm_1,
                    rep.avi_norm_2);
        for (const auto& [idx, rho] : rep.spectral_radius_at) std::printf("    rho at policy %zu: %.4f\n", idx, rho);

        const Trajectory q = run_deterministic_q(sc.mdp, sc.phi, d, 0.0, StepSchedule::constant(0.1),
                                                 Vector(2, 0.0), {100000, 1e-6, 1000, 5});
        std::printf("  deterministic Q: %s after %zu, theta = (%.4f, %.4f)\n", std::string(to_string(q.verdict)).c_str(),
                    q.iterations, q.theta_final[0], q.theta_final[1]);
        const Trajectory a = run_avi(sc.mdp, sc.phi, d, 0.0, Vector(2, 0.0), {10000, 1e-8, 1000, 5});
        std::printf("  AVI: %s after %zu, theta = (%.4f, %.4f)\n", std::string(to_string(a.verdict)).c_str(),
                    a.iterations, a.theta_final[0], a.theta_final[1]);
    }
}
