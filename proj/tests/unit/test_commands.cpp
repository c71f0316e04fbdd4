#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "qsub/commands.hpp"
#include "qsub/scenario.hpp"
#include "support/scenarios.hpp"

using namespace qsub;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string &name) { return std::string(QSUB_FIXTURE_DIR) + "/" + name; }

class CommandTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("qsub_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    std::string write_spec(const std::string &name, const ScenarioSpec &spec) const {
        std::ofstream(path(name)) << serialize(spec);
        return path(name);
    }

    fs::path dir_;
};

ScenarioSpec geodesic_spec(MetricSpec metric, std::size_t dim) {
    ScenarioSpec s;
    s.dim = dim;
    s.hamiltonian = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    s.initial_state = ComplexVector::Zero(static_cast<Eigen::Index>(dim));
    s.initial_state[0] = 1.0;
    s.initial_point = ComplexVector::Zero(static_cast<Eigen::Index>(dim));
    s.schedule.push_back({1.0, {ComplexMatrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))}, true});
    s.metric = std::move(metric);
    return s;
}

std::vector<nlohmann::json> jsonl_lines(const std::string &text) {
    std::vector<nlohmann::json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
    return out;
}

} // namespace

TEST_F(CommandTest, RunForkListsThreeQuartersAndOneQuarter) {
    std::ostringstream out, err;
    CommandOptions o;
    o.scenario = fixture("fork.qsub.json");
    ASSERT_EQ(cmd_run(o, out, err), exit_ok) << err.str();
    const auto lines = jsonl_lines(out.str());
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(lines[0]["seed"], 7);
    std::size_t measurements = 0;
    for (const auto &l : lines) {
        if (l.value("type", "") != "measurement") continue;
        ++measurements;
        EXPECT_NEAR(l["probs"][0].get<double>(), 0.75, 1e-12);
        EXPECT_NEAR(l["probs"][1].get<double>(), 0.25, 1e-12);
    }
    EXPECT_EQ(measurements, 1u);
}

TEST_F(CommandTest, RunEigenstateIsDeterministic) {
    ScenarioSpec s = testkit::fork_spec();
    s.initial_state << 0.0, 1.0;
    std::ostringstream out, err;
    CommandOptions o;
    o.scenario = write_spec("eigen.qsub.json", s);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        o.seed = seed;
        out.str("");
        ASSERT_EQ(cmd_run(o, out, err), exit_ok);
        for (const auto &l : jsonl_lines(out.str()))
            if (l.value("type", "") == "measurement") {
                EXPECT_EQ(l["outcome"], 2);
                EXPECT_EQ(l["probs"][1].get<double>(), 1.0);
            }
    }
}

TEST_F(CommandTest, RunIsByteIdenticalAndSeedOverrideChangesHash) {
    CommandOptions o;
    o.scenario = fixture("dim8_chain.qsub.json");
    std::ostringstream a, b, err;
    ASSERT_EQ(cmd_run(o, a, err), exit_ok);
    ASSERT_EQ(cmd_run(o, b, err), exit_ok);
    EXPECT_EQ(a.str(), b.str());
    o.seed = 99;
    std::ostringstream c;
    ASSERT_EQ(cmd_run(o, c, err), exit_ok);
    const auto h1 = jsonl_lines(a.str())[0], h2 = jsonl_lines(c.str())[0];
    EXPECT_EQ(h2["seed"], 99);
    EXPECT_NE(h1["spec_sha256"], h2["spec_sha256"]);
}

TEST_F(CommandTest, RunWritesFileAndCsv) {
    CommandOptions o;
    o.scenario = fixture("spin_precession.qsub.json");
    o.out = path("trace.csv");
    o.format = TraceFormat::csv;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_run(o, out, err), exit_ok) << err.str();
    EXPECT_TRUE(out.str().empty());
    EXPECT_EQ(testkit::read_text(o.out).rfind("# trace_version=1\n", 0), 0u);
}

TEST_F(CommandTest, InvalidFileExitsOneWithoutOutput) {
    for (const char *name : {"invalid_norm.qsub.json", "invalid_noncommuting.qsub.json", "invalid_syntax.qsub.json"}) {
        CommandOptions o;
        o.scenario = fixture(name);
        o.out = path("never.jsonl");
        std::ostringstream out, err;
        EXPECT_EQ(cmd_run(o, out, err), exit_validation) << name;
        EXPECT_FALSE(fs::exists(o.out)) << name;
        EXPECT_NE(err.str().find("error"), std::string::npos) << name;
    }
    CommandOptions missing;
    missing.scenario = path("does_not_exist.qsub.json");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_run(missing, out, err), exit_runtime);
}

TEST_F(CommandTest, ValidateReports) {
    std::ostringstream out, err;
    CommandOptions o;
    o.scenario = fixture("fork.qsub.json");
    EXPECT_EQ(cmd_validate(o, out, err), exit_ok);
    EXPECT_NE(out.str().find("0 errors, 0 warnings"), std::string::npos) << out.str();

    out.str("");
    o.scenario = fixture("invalid_noncommuting.qsub.json");
    EXPECT_EQ(cmd_validate(o, out, err), exit_validation);
    EXPECT_NE(out.str().find("commutator norm"), std::string::npos) << out.str();

    out.str("");
    o.scenario = fixture("nonmaximal_qutrit.qsub.json");
    EXPECT_EQ(cmd_validate(o, out, err), exit_ok);
    EXPECT_NE(out.str().find("0 errors, 1 warning"), std::string::npos) << out.str();
}

TEST_F(CommandTest, EnsembleSingleSample) {
    CommandOptions o;
    o.scenario = fixture("fork.qsub.json");
    o.samples = 1;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_ensemble(o, out, err), exit_ok) << err.str();
    const auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j["samples"], 1);
    const auto counts = j["events"][0]["counts"];
    EXPECT_EQ(counts[0].get<int>() + counts[1].get<int>(), 1);
    o.samples = 0;
    EXPECT_EQ(cmd_ensemble(o, out, err), exit_validation);
}

TEST_F(CommandTest, EnsembleIndependentOfThreadCount) {
    for (const char *name : {"dim8_chain.qsub.json", "unobserved_then_observed.qsub.json"}) {
        CommandOptions o;
        o.scenario = fixture(name);
        o.samples = 20000;
        o.seed = 5;
        std::ostringstream one, eight, err;
        o.threads = 1;
        ASSERT_EQ(cmd_ensemble(o, one, err), exit_ok) << err.str();
        o.threads = 8;
        ASSERT_EQ(cmd_ensemble(o, eight, err), exit_ok);
        EXPECT_EQ(one.str(), eight.str()) << name;
    }
}

TEST_F(CommandTest, EnsembleForkFrequency) {
    const ChainPlan plan(testkit::fork_spec());
    const EnsembleSummary s = run_ensemble(plan, 7, 100000, 2);
    ASSERT_EQ(s.events.size(), 1u);
    EXPECT_NEAR(s.events[0].frequencies[0], 0.75, 0.0041);
    EXPECT_EQ(s.events[0].counts[0] + s.events[0].counts[1], 100000u);
}

TEST_F(CommandTest, GeodesicRequiresMetric) {
    CommandOptions o;
    o.scenario = fixture("fork.qsub.json");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_geodesic(o, out, err), exit_validation);
    EXPECT_NE(err.str().find("/metric"), std::string::npos);
}

TEST_F(CommandTest, GeodesicFlatIsStraightWithoutDrift) {
    CommandOptions o;
    o.scenario = fixture("flat_metric.qsub.json");
    std::ostringstream out, err;
    ASSERT_EQ(cmd_geodesic(o, out, err), exit_ok) << err.str();
    const auto lines = jsonl_lines(out.str());
    const auto &report = lines.back();
    EXPECT_EQ(report["type"], "geodesic_report");
    EXPECT_LE(report["drift"].get<double>(), 1e-12);
    EXPECT_NEAR(report["path_length"].get<double>(), 1.0, 1e-12); // V = 1, u-span 1
    EXPECT_LE(report["oracle_relative_difference"].get<double>(), 1e-8);
}

TEST(GeodesicStudy, ConformalKappaZeroEqualsFlat) {
    testkit::RandomMatrices rnd(81);
    ScenarioSpec flat = geodesic_spec({MetricFamily::flat, {}, std::nullopt}, 2);
    flat.initial_state = rnd.state(2);
    flat.initial_point = rnd.vector(2);
    ScenarioSpec zero = flat;
    zero.metric = MetricSpec{MetricFamily::diagonal_conformal, {0.0}, std::nullopt};
    const Trace a = geodesic_study(flat, 0.7), b = geodesic_study(zero, 0.7);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t k = 0; k + 1 < a.records.size(); ++k) {
        const auto &ga = std::get<GeodesicSample>(a.records[k]);
        const auto &gb = std::get<GeodesicSample>(b.records[k]);
        EXPECT_LE((ga.z - gb.z).norm(), 1e-12);
        EXPECT_LE((ga.p - gb.p).norm(), 1e-12);
        EXPECT_LE(max_abs(ga.gram - gb.gram), 1e-12);
    }
    const auto &ra = std::get<GeodesicReport>(a.records.back());
    const auto &rb = std::get<GeodesicReport>(b.records.back());
    EXPECT_NEAR(ra.path_length, rb.path_length, 1e-12);
    EXPECT_NEAR(ra.drift, rb.drift, 1e-12);
}

TEST(GeodesicStudy, ConformalDim1ZeroToOneMatchesOracle) {
    // kappa = 1 from 0 with unit metric speed: z(u) = sinh(u), so u = asinh(1) ends at 1
    const ScenarioSpec s = geodesic_spec({MetricFamily::diagonal_conformal, {1.0}, std::nullopt}, 1);
    const Trace t = geodesic_study(s, std::asinh(1.0));
    const auto &last = std::get<GeodesicSample>(t.records[t.records.size() - 2]);
    EXPECT_LE(std::abs(last.z[0] - Complex(1.0, 0.0)), 1e-10);
    const auto &r = std::get<GeodesicReport>(t.records.back());
    ASSERT_TRUE(r.oracle_relative_difference.has_value());
    EXPECT_LE(*r.oracle_relative_difference, 1e-4);
    EXPECT_EQ(*r.oracle_segments, kOracleSegments);
}

TEST(GeodesicStudy, LaunchSpeedIsVelocityScale) {
    ScenarioSpec s = geodesic_spec({MetricFamily::diagonal_conformal, {1.0}, std::nullopt}, 3);
    s.velocity_scale = 2.5;
    s.initial_point = ComplexVector::Constant(3, Complex(0.3, -0.1));
    s.initial_state = ComplexVector::Constant(3, 1.0 / std::sqrt(3.0));
    const Trace t = geodesic_study(s, 0.2);
    const auto &first = std::get<GeodesicSample>(t.records.front());
    const auto field = HermitianMetricField::from_spec(*s.metric, 3);
    EXPECT_NEAR(metric_speed(field, first.z, first.p), 2.5, 1e-12);
    EXPECT_FALSE(std::get<GeodesicReport>(t.records.back()).oracle_length.has_value());
}
