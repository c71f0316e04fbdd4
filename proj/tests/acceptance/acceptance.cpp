// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsub/commands.hpp"
#include "qsub/heisenberg.hpp"
#include "qsub/hilbert.hpp"
#include "qsub/measurement.hpp"
#include "qsub/riemann.hpp"
#include "qsub/scenario.hpp"
#include "qsub/substrate.hpp"
#include "support/random_matrices.hpp"
#include "support/scenarios.hpp"

using namespace qsub;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> check;
};

std::string fmt(const char *format, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, x);
    return buf;
}

IntegratorSettings step(double h) {
    IntegratorSettings s;
    s.h = h;
    return s;
}

std::vector<std::string> valid_fixtures() {
    std::vector<std::string> out;
    for (const auto &entry : std::filesystem::directory_iterator(QSUB_FIXTURE_DIR)) {
        const std::string name = entry.path().filename().string();
        if (name.ends_with(".qsub.json") && !name.starts_with("invalid")) out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

Outcome fork_probabilities() {
    const ScenarioSpec s = testkit::fork_spec();
    const ChainPlan plan(s);
    const auto dist = born_distribution(StateAmplitudes{s.initial_state}, plan.basis(0), BornVariant::standard);
    const double exact_err = std::max(std::abs(dist.probability(1) - 0.75), std::abs(dist.probability(2) - 0.25));
    const EnsembleSummary sum = run_ensemble(plan, s.seed, 100000, 1);
    const double freq = sum.events[0].frequencies[0];
    Outcome o;
    o.pass = exact_err <= 1e-12 && std::abs(freq - 0.75) <= 0.0041;
    o.detail = "P error " + fmt("%.1e", exact_err) + ", frequency " + fmt("%.5f", freq) + " (need 0.75 +- 0.0041)";
    return o;
}

Outcome born_statistics() {
    testkit::RandomMatrices rnd(2024);
    double worst = 1.0;
    std::size_t tests = 0;
    for (Eigen::Index n : {4, 8}) {
        for (int k = 0; k < 20; ++k) {
            const ScenarioSpec s = testkit::random_spec(rnd, n, {rnd.uniform(0.1, 3.0)});
            const EnsembleSummary sum = run_ensemble(ChainPlan(s), 1000 + static_cast<std::uint64_t>(k), 100000, 1);
            for (const auto &e : sum.events) {
                worst = std::min(worst, e.p_value);
                ++tests;
            }
        }
    }
    return {worst > 0.001, std::to_string(tests) + " scenarios, smallest p-value " + fmt("%.4f", worst) + " (need > 0.001)"};
}

Outcome picture_duality() {
    testkit::RandomMatrices rnd(31);
    const Complex I(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 1 + trial % 8;
        const double hbar = rnd.uniform(0.5, 2.0), V = rnd.uniform(0.5, 3.0);
        const HermitianMatrix h(rnd.hermitian(n)), a(rnd.hermitian(n));
        const ComplexVector alpha = rnd.state(n);
        const double t = rnd.uniform(-5.0, 5.0);
        const double heis = expectation(VelocityVector(V * alpha), evolve_observable({a, "A"}, {h}, t, 0.0, hbar), V);
        const ComplexVector psi = ComplexMatrix(-I * t / hbar * h.matrix()).exp() * alpha;
        const double schr = psi.dot(a.matrix() * psi).real();
        worst = std::max(worst, std::abs(heis - schr));
    }
    return {worst <= 1e-9, "max |Heisenberg - Schroedinger| " + fmt("%.2e", worst) + " over 100 triples"};
}

Outcome orthogonality_preservation() {
    testkit::RandomMatrices rnd(41);
    double worst = 0.0;
    for (Eigen::Index n : {2, 5, 8}) {
        const HermitianMatrix h(rnd.hermitian(n));
        const std::vector<HermitianMatrix> ops{HermitianMatrix(rnd.hermitian(n))};
        const CommonEigenbasis b = simultaneous_diagonalize(ops);
        for (int k = 0; k < 100; ++k) {
            const double t = rnd.uniform(-50.0, 50.0);
            const CommonEigenbasis bt = evolve_eigenbasis(b, Hamiltonian{h}, t, 0.0, 1.0);
            ComplexMatrix g = bt.vectors.adjoint() * bt.vectors;
            g.diagonal().setZero();
            worst = std::max(worst, max_abs(g));
        }
    }
    return {worst <= 1e-10, "max off-diagonal Gram entry " + fmt("%.2e", worst)};
}

Outcome flat_reduction() {
    testkit::RandomMatrices rnd(51);
    double line_err = 0.0, transport_err = 0.0;
    for (Eigen::Index n : {1, 2, 4}) {
        const auto field = HermitianMetricField::flat(static_cast<std::size_t>(n));
        const ComplexVector z0 = rnd.vector(n), alpha = rnd.state(n);
        const double V = rnd.uniform(0.5, 2.0);
        const VelocityVector v = velocity_from_state({alpha}, VelocityScale(V));
        const GeodesicPath path = integrate_geodesic(field, z0, v.components(), 1.0, step(1e-3));
        for (const auto &s : path.samples()) {
            const StatePoint expect = advance(StatePoint(z0), v, 0.0, s.u);
            line_err = std::max(line_err, (s.z - expect.coordinates()).norm());
        }
        const std::vector<ComplexVector> w0{rnd.vector(n), rnd.vector(n)};
        const TransportFrame frame = parallel_transport(path, w0);
        for (const auto &ws : frame.vectors)
            for (std::size_t a = 0; a < ws.size(); ++a)
                transport_err = std::max(transport_err, (ws[a] - w0[a]).cwiseAbs().maxCoeff());
    }
    return {line_err <= 1e-9 && transport_err <= 1e-12,
            "line error " + fmt("%.1e", line_err) + ", transport change " + fmt("%.1e", transport_err) + " over 1000 steps"};
}

Outcome geodesic_vs_oracle() {
    const auto field = HermitianMetricField::conformal(1);
    testkit::RandomMatrices rnd(61);
    double worst_rel = 0.0;
    std::size_t shorter_violations = 0;
    const std::vector<std::pair<Complex, Complex>> ends{{0.0, 1.0}, {Complex(0.3, 0.2), Complex(-0.5, 0.8)}};
    for (const auto &[p, q] : ends) {
        ComplexVector zp(1), zq(1);
        zp << p;
        zq << q;
        const ShootingResult shot = shoot_geodesic(field, zp, zq, step(1e-3));
        const double len = path_length(shot.path);
        const DiscretePath oracle = variational_oracle(field, zp, zq, 64);
        worst_rel = std::max(worst_rel, std::abs(len - oracle.length) / oracle.length);
        // 100 same-endpoint perturbations of the geodesic polyline
        const std::size_t segments = 100;
        const std::size_t stride = (shot.path.samples().size() - 1) / segments;
        for (int trial = 0; trial < 100; ++trial) {
            const Complex bump = 0.05 * rnd.complex();
            std::vector<ComplexVector> pts;
            for (std::size_t k = 0; k <= segments; ++k) {
                ComplexVector z = shot.path.samples()[k * stride].z;
                if (k != 0 && k != segments) {
                    const double s = static_cast<double>(k) / segments;
                    z[0] += bump * std::sin(std::numbers::pi * s) + 0.005 * rnd.complex();
                }
                pts.push_back(z);
            }
            if (!(len <= discrete_length(field, pts))) ++shorter_violations;
        }
    }
    return {worst_rel <= 1e-4 && shorter_violations == 0,
            "max relative length difference " + fmt("%.2e", worst_rel) + ", perturbed paths shorter than geodesic: " +
                std::to_string(shorter_violations) + "/200"};
}

Outcome integrator_order() {
    testkit::RandomMatrices rnd(71);
    double lo = 1e300, hi = 0.0;
    for (std::size_t dim : {1u, 2u, 3u}) {
        for (double kappa : {0.5, 1.0, 2.0}) {
            const auto field = HermitianMetricField::conformal(dim, kappa);
            const auto n = static_cast<Eigen::Index>(dim);
            // unit launch speed; with kappa = 2 and dim >= 2 faster launches run off to infinity before u = 1
            const ComplexVector z0 = 0.5 * rnd.vector(n), p0 = rnd.state(n);
            const ComplexVector ref = integrate_geodesic(field, z0, p0, 1.0, step(0.025 / 32)).back().z;
            const double e1 = (integrate_geodesic(field, z0, p0, 1.0, step(0.025)).back().z - ref).norm();
            const double e2 = (integrate_geodesic(field, z0, p0, 1.0, step(0.0125)).back().z - ref).norm();
            lo = std::min(lo, e1 / e2);
            hi = std::max(hi, e1 / e2);
        }
    }
    return {lo >= 16.0 * 0.8 && hi <= 16.0 * 1.2,
            "error ratio under step halving in [" + fmt("%.2f", lo) + ", " + fmt("%.2f", hi) + "] (need 16 +- 20%)"};
}

Outcome transport_self_consistency() {
    testkit::RandomMatrices rnd(81);
    double tangent = 0.0, spectrum = 0.0;
    for (auto variant : {TransportVariant::conjugate_slot, TransportVariant::linear_slot}) {
        for (std::size_t dim : {1u, 2u}) {
            const auto n = static_cast<Eigen::Index>(dim);
            const auto field = HermitianMetricField::conformal(dim);
            const GeodesicPath path = integrate_geodesic(field, rnd.vector(n), rnd.vector(n), 1.0, step(1e-3));
            const std::vector<ComplexVector> w0{path.front().p};
            const TransportFrame frame = parallel_transport(path, w0, variant);
            for (std::size_t k = 0; k < path.samples().size(); ++k)
                tangent = std::max(tangent, (frame.vectors[k][0] - path.samples()[k].p).norm());
            const ComplexMatrix h0 = rnd.hermitian(n);
            const Eigen::VectorXd e0 = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(h0).eigenvalues();
            for (const auto &h : transport_operator(path, h0, variant)) {
                Eigen::VectorXcd e = Eigen::ComplexEigenSolver<ComplexMatrix>(h).eigenvalues();
                std::sort(e.begin(), e.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
                spectrum = std::max(spectrum, (e - e0.cast<Complex>()).cwiseAbs().maxCoeff());
            }
        }
    }
    return {tangent <= 1e-8 && spectrum <= 1e-8,
            "tangent deviation " + fmt("%.1e", tangent) + ", spectrum deviation " + fmt("%.1e", spectrum)};
}

Outcome determinism() {
    std::size_t mismatches = 0, compared = 0;
    for (const std::string &file : valid_fixtures()) {
        CommandOptions o;
        o.scenario = file;
        std::ostringstream a, b, err;
        if (cmd_run(o, a, err) != exit_ok || cmd_run(o, b, err) != exit_ok) return {false, "run failed on " + file};
        mismatches += a.str() != b.str();
        o.samples = 5000;
        o.threads = 1;
        std::ostringstream one, eight;
        if (cmd_ensemble(o, one, err) != exit_ok) return {false, "ensemble failed on " + file};
        o.threads = 8;
        if (cmd_ensemble(o, eight, err) != exit_ok) return {false, "ensemble failed on " + file};
        mismatches += one.str() != eight.str();
        compared += 2;
    }
    return {mismatches == 0, std::to_string(compared) + " output pairs compared, " + std::to_string(mismatches) +
                                 " differ"};
}

Outcome scenario_round_trip() {
    std::size_t files = 0, failures = 0;
    std::set<MetricFamily> families;
    std::set<BornVariant> variants;
    for (const std::string &file : valid_fixtures()) {
        ++files;
        const ParseResult r = parse_scenario(testkit::read_text(file));
        if (!r.ok()) {
            ++failures;
            continue;
        }
        const ParseResult again = parse_scenario(serialize(*r.spec));
        if (!again.ok() || !(*again.spec == *r.spec)) ++failures;
        if (r.spec->metric) families.insert(r.spec->metric->family);
        variants.insert(r.spec->born_variant);
    }
    const bool coverage = families.size() == 3 && variants.size() == 2;
    return {files >= 10 && failures == 0 && coverage,
            std::to_string(files) + " fixtures, " + std::to_string(failures) + " failures, " +
                std::to_string(families.size()) + "/3 metric families, " + std::to_string(variants.size()) +
                "/2 born variants"};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "fork probabilities", 10, fork_probabilities},
        {2, "Born-rule statistics", 120, born_statistics},
        {3, "picture duality", 5, picture_duality},
        {4, "orthogonality preservation", 5, orthogonality_preservation},
        {5, "flat reduction", 5, flat_reduction},
        {6, "geodesic vs variational oracle", 30, geodesic_vs_oracle},
        {7, "integrator order", 30, integrator_order},
        {8, "transport self-consistency", 10, transport_self_consistency},
        {9, "determinism across thread counts", 30, determinism},
        {10, "scenario round-trip", 1, scenario_round_trip},
    };
    int failed = 0;
    for (const auto &c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("[%s] %2d %s: %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(),
                    o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " OVER BUDGET");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
