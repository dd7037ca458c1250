#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hkrm/cli.hpp"

using namespace hkrm;
using namespace hkrm::cli;

namespace {

RunManifest manifest(const std::string& sub) {
    RunManifest m;
    m.subcommand = sub;
    m.flags = {{"--t", "1"}};
    return m;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// Parses "a,b" data rows after the header lines.
std::vector<std::pair<double, double>> density_rows(const std::string& csv) {
    std::vector<std::pair<double, double>> rows;
    for (const auto& l : lines(csv)) {
        if (l.empty() || l[0] == '#' || l.starts_with("theta")) continue;
        const auto comma = l.find(',');
        rows.emplace_back(std::stod(l.substr(0, comma)), std::stod(l.substr(comma + 1)));
    }
    return rows;
}

} // namespace

TEST(Manifest, JsonAndCsvComment) {
    RunManifest m = manifest("moments");
    m.seed = 7;
    m.wall_time_s = 1.5;
    const json j = m.to_json();
    EXPECT_EQ(j["subcommand"], "moments");
    EXPECT_EQ(j["seed"], 7);
    EXPECT_EQ(j["version"], kToolVersion);
    EXPECT_EQ(j["flags"]["--t"], "1");
    EXPECT_DOUBLE_EQ(j["wall_time_s"].get<double>(), 1.5);
    const std::string c = m.csv_comment();
    EXPECT_TRUE(c.starts_with("# manifest: {"));
    EXPECT_EQ(c.find("wall_time"), std::string::npos);
}

TEST(Moments, AllOnesAtZero) {
    const json j = cmd_moments({0.0, 12, false}, manifest("moments"));
    ASSERT_EQ(j["moments"].size(), 13u);
    for (const auto& e : j["moments"]) EXPECT_DOUBLE_EQ(e["value"].get<double>(), 1.0);
    EXPECT_FALSE(j["precision_warning"].get<bool>());
}

TEST(Moments, PrecisionGuard) {
    EXPECT_THROW(cmd_moments({1.0, 31, false}, manifest("moments")), PrecisionError);
    EXPECT_NO_THROW(cmd_moments({1.0, 31, true}, manifest("moments")));
    EXPECT_THROW(cmd_moments({1.0, -1, false}, manifest("moments")), InvalidParameter);
}

TEST(Flow, CircleGroupValue) {
    const json j = cmd_flow({"v3", 0.8, "1", 12}, manifest("flow"));
    EXPECT_NEAR(j["value"][0].get<double>(), std::exp(-0.8 * 9 / 2), 1e-12);
    EXPECT_NEAR(j["value"][1].get<double>(), 0.0, 1e-14);
    EXPECT_EQ(j["N"], 1);
    EXPECT_FALSE(j["ill_conditioned"].get<bool>());
}

TEST(Flow, LimitAndDimensionParsing) {
    const json j = cmd_flow({"v1", 1.0, "limit", 12}, manifest("flow"));
    EXPECT_EQ(j["N"], "limit");
    EXPECT_NEAR(j["value"][0].get<double>(), std::exp(-0.5), 1e-14);
    EXPECT_THROW(parse_dimension("0"), ParseError);
    EXPECT_THROW(parse_dimension("3x"), ParseError);
    EXPECT_THROW(parse_dimension("big"), ParseError);
    EXPECT_EQ(parse_dimension("5"), 5);
}

TEST(Flow, DegreeCapAndIllConditioning) {
    EXPECT_THROW(cmd_flow({"v13", 1.0, "4", 12}, manifest("flow")), DegreeCapExceeded);
    EXPECT_NO_THROW(cmd_flow({"v13", 1.0, "4", 13}, manifest("flow")));
    EXPECT_THROW(cmd_flow({"v1 +", 1.0, "4", 12}, manifest("flow")), ParseError);
    const json j = cmd_flow({"v1*v1*v1*v1*v1", -3.0, "2", 12}, manifest("flow"));
    EXPECT_TRUE(j["ill_conditioned"].get<bool>());
}

TEST(Observables, Grammar) {
    EXPECT_TRUE(std::holds_alternative<TracePoly>(parse_observable("v1*v-1").what));
    const Observable zz = parse_observable("zz:v2");
    EXPECT_EQ(zz.target, Observable::Target::PositiveMap);
    const Observable f = parse_observable("f:v1 + v-1 + 2");
    EXPECT_TRUE(std::holds_alternative<TestFunction>(f.what));
    EXPECT_EQ(f.name, "f:v1 + v-1 + 2");
    EXPECT_THROW(parse_observable("f:v1*v1"), ParseError);
    EXPECT_THROW(parse_observable("f:v2*v2"), ParseError);
}

TEST(Simulate, CsvLayoutAndDeterminism) {
    SimulateArgs a;
    a.config = {Group::Unitary, 3, 0.5, 0.0, 20, 5, 11};
    a.observables = {"v1", "f:v1+v-1"};
    const SimulateOutput o1 = cmd_simulate(a, manifest("simulate"));
    const SimulateOutput o2 = cmd_simulate(a, manifest("simulate"));
    EXPECT_EQ(o1.csv, o2.csv);
    const auto l = lines(o1.csv);
    ASSERT_EQ(l.size(), 3u + 5 * 3);
    EXPECT_EQ(l[0], "# group=unitary, N=3, t=0.5, s=0, seed=11");
    EXPECT_TRUE(l[1].starts_with("# manifest: "));
    EXPECT_EQ(l[2], "path,index,re,im");
    EXPECT_TRUE(l[3].starts_with("0,0,"));
    EXPECT_TRUE(l.back().starts_with("4,2,"));
    const json& s = o1.summary;
    EXPECT_EQ(s["config"]["steps"], 20);
    ASSERT_EQ(s["observables"].size(), 2u);
    for (const char* key : {"name", "mean", "variance", "stderr"}) EXPECT_TRUE(s["observables"][0].contains(key));
    EXPECT_EQ(s["observables"][0]["mean"], o2.summary["observables"][0]["mean"]);

    SimulateArgs threaded = a;
    threaded.threads = 3;
    EXPECT_EQ(cmd_simulate(threaded, manifest("simulate")).csv, o1.csv);
}

TEST(Simulate, UnitaryEigenvaluesOnCircle) {
    SimulateArgs a;
    a.config = {Group::Unitary, 4, 1.0, 0.0, 50, 3, 2};
    a.observables = {"v1"};
    for (const auto& l : lines(cmd_simulate(a, manifest("simulate")).csv)) {
        if (l.empty() || !std::isdigit(static_cast<unsigned char>(l[0]))) continue;
        std::istringstream in(l);
        std::string p, i, re, im;
        std::getline(in, p, ',');
        std::getline(in, i, ',');
        std::getline(in, re, ',');
        std::getline(in, im, ',');
        EXPECT_NEAR(std::hypot(std::stod(re), std::stod(im)), 1.0, 1e-10);
    }
}

TEST(Simulate, RegimeViolation) {
    SimulateArgs a;
    a.config = {Group::GeneralLinear, 4, 1.0, 0.4, 40, 10, 0};
    a.observables = {"v1"};
    EXPECT_THROW(cmd_simulate(a, manifest("simulate")), RegimeViolation);
    a.config.N = 0;
    a.config.s = 1.0;
    EXPECT_THROW(cmd_simulate(a, manifest("simulate")), InvalidConfig);
}

TEST(Density, UnitaryHeaderAndFullSupportAtFour) {
    const std::string csv = cmd_density({"unitary", 4.0, 64}, manifest("density"));
    const auto l = lines(csv);
    EXPECT_EQ(l[0], "# law=unitary, t=4");
    EXPECT_TRUE(l[1].starts_with("# manifest: "));
    EXPECT_EQ(l[2], "theta_or_x,density");
    const auto rows = density_rows(csv);
    ASSERT_EQ(rows.size(), 64u);
    EXPECT_NEAR(rows.front().first, -std::numbers::pi, 1e-15);
    EXPECT_NEAR(rows.back().first, std::numbers::pi, 1e-15);
    for (const auto& [x, y] : rows) EXPECT_GT(y, 0.0) << x;
}

TEST(Density, TrapezoidMass) {
    // The circle density is normalised against d theta / 2 pi.
    for (double t : {0.5, 1.0, 2.0, 4.0, 6.0}) {
        const auto rows = density_rows(cmd_density({"unitary", t, 4096}, manifest("density")));
        double mass = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            mass += 0.5 * (rows[i].first - rows[i - 1].first) * (rows[i].second + rows[i - 1].second);
        }
        EXPECT_NEAR(mass / (2 * std::numbers::pi), 1.0, 1e-4) << t;
    }
}

TEST(Density, PositiveGridSpansSupport) {
    const auto rows = density_rows(cmd_density({"positive", 1.0, 200}, manifest("density")));
    const IntervalSupport s = positive_support(-1.0);
    ASSERT_EQ(rows.size(), 200u);
    EXPECT_NEAR(rows.front().first, s.r_minus, 1e-12);
    EXPECT_NEAR(rows.back().first, s.r_plus, 1e-12);
    for (const auto& [x, y] : rows) EXPECT_GE(y, 0.0);
    EXPECT_THROW(cmd_density({"positive", 0.0, 10}, manifest("density")), InvalidParameter);
    EXPECT_THROW(cmd_density({"semicircle", 1.0, 10}, manifest("density")), InvalidParameter);
}

TEST(VarianceScan, ExactColumnAndSlope) {
    VarianceScanArgs a;
    a.Ns = {2, 4};
    a.t = 1.0;
    a.paths = 100;
    a.steps = 20;
    const json j = cmd_variance_scan(a, manifest("variance-scan"));
    ASSERT_EQ(j["rows"].size(), 2u);
    EXPECT_TRUE(j["rows"][0]["exact_variance"].is_number());
    EXPECT_TRUE(j["slope"].is_number());
    EXPECT_LT(j["exact_slope"].get<double>(), -1.5);

    a.observable = "zz:v1";
    EXPECT_TRUE(cmd_variance_scan(a, manifest("variance-scan"))["rows"][0]["exact_variance"].is_null());
    a.Ns = {};
    EXPECT_THROW(cmd_variance_scan(a, manifest("variance-scan")), InvalidConfig);
}

TEST(VarianceScan, SlopeFit) {
    EXPECT_NEAR(loglog_slope({2, 4, 8}, {1.0 / 4, 1.0 / 16, 1.0 / 64}), -2.0, 1e-14);
    EXPECT_THROW(loglog_slope({2}, {1}), InvalidParameter);
}

TEST(CheckIntertwine, PassesAndFailsOnTolerance) {
    const json ok = cmd_check_intertwine({3, 0, 1e-3, 1e-4}, manifest("check-intertwine"));
    EXPECT_TRUE(ok["pass"].get<bool>());
    EXPECT_EQ(ok["cases"].size(), intertwine_test_polys().size());
    const json bad = cmd_check_intertwine({3, 0, 1e-1, 1e-12}, manifest("check-intertwine"));
    EXPECT_FALSE(bad["pass"].get<bool>());
}
