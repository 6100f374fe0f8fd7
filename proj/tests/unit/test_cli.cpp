#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

#include "matchbound/bounds.hpp"
#include "matchbound/diagnostics.hpp"
#include "matchbound/errors.hpp"
#include "matchbound_cli/cli.hpp"

namespace fs = std::filesystem;
using namespace matchbound;

namespace {

const fs::path kData = MATCHBOUND_TEST_DATA_DIR;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "matchbound");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "matchbound_cli_tests" / info->name() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  for (std::string line; std::getline(ss, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

SweepResult toy_sweep(const std::vector<std::pair<double, double>>& upper_lower, double baseline) {
  SweepResult s;
  s.baseline.method = "toy";
  s.baseline.estimate = baseline;
  double eps = 0.0;
  for (const auto& [hi, lo] : upper_lower) {
    SweepPoint p;
    p.epsilon = eps;
    p.bounds.upper.estimate = EstimateReport{hi, 3, EstimandKind::satt};
    p.bounds.lower.estimate = EstimateReport{lo, 3, EstimandKind::satt};
    s.points.push_back(p);
    eps += 0.5;
  }
  return s;
}

}  // namespace

TEST(CliBounds, FixtureMatchesBruteForceOracle) {
  const auto out = scratch("run");
  const auto r = run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4",
                          "--matches", "3", "--out", out.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto expected = nlohmann::json::parse(slurp(kData / "fixture_4x6_expected.json"));
  const auto got = nlohmann::json::parse(slurp(out / "bounds.json"));
  EXPECT_NEAR(got["bounds"]["upper"]["estimate"].get<double>(), expected["upper"].get<double>(), 1e-9);
  EXPECT_NEAR(got["bounds"]["lower"]["estimate"].get<double>(), expected["lower"].get<double>(), 1e-9);
  EXPECT_NEAR(got["baseline"]["estimate"].get<double>(), expected["baseline_estimate"].get<double>(), 1e-12);
  EXPECT_EQ(got["bounds"]["upper"]["n_matches"].get<int>(), 3);
  EXPECT_EQ(got["bounds"]["upper"]["status"], "optimal");
  EXPECT_TRUE(got["bounds"]["upper"]["quality_ok"].get<bool>());
}

TEST(CliBounds, CsvHasOneRowPerSide) {
  const auto out = scratch("run");
  ASSERT_EQ(run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4", "--matches",
                     "3", "--out", out.string(), "--formats", "csv"})
                .code,
            0);
  const auto lines = split_lines(slurp(out / "bounds.csv"));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0],
            "epsilon,bound,status,estimate,ci95_lower,ci95_upper,n_matches,solver_objective,best_bound,nodes,"
            "quality_ok,carried_forward");
  EXPECT_EQ(split_cells(lines[1])[1], "upper");
  EXPECT_EQ(split_cells(lines[2])[1], "lower");
  EXPECT_FALSE(fs::exists(out / "bounds.json"));
}

TEST(CliBounds, WriteLpEmitsBothModels) {
  const auto out = scratch("run");
  ASSERT_EQ(run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4", "--matches",
                     "3", "--out", out.string(), "--write-lp", "--trace"})
                .code,
            0);
  EXPECT_EQ(slurp(out / "model_upper.lp").rfind("Maximize", 0), 0u);
  EXPECT_EQ(slurp(out / "model_lower.lp").rfind("Minimize", 0), 0u);
  EXPECT_FALSE(slurp(out / "trace.log").empty());
}

TEST(CliSweep, ReplicationGridGivesSixRowsPerSide) {
  const auto out = scratch("run");
  const auto r = run_cli({"sweep", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4",
                          "--matches", "3", "--eps", "0,0.2,0.4,0.6,0.9,1.0", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = split_lines(slurp(out / "sweep.csv"));
  ASSERT_EQ(lines.size(), 13u);
  std::size_t upper = 0;
  std::size_t lower = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto cells = split_cells(lines[k]);
    upper += cells[1] == "upper";
    lower += cells[1] == "lower";
  }
  EXPECT_EQ(upper, 6u);
  EXPECT_EQ(lower, 6u);
  const auto j = nlohmann::json::parse(slurp(out / "sweep.json"));
  EXPECT_TRUE(j["nested"].get<bool>());
  EXPECT_TRUE(fs::exists(out / "sweep.svg"));
}

TEST(CliProfile, SimulatedSeedSevenMatchesGoldenFile) {
  const auto sim = scratch("sim");
  ASSERT_EQ(run_cli({"simulate", "--seed", "7", "--out", sim.string()}).code, 0);
  const auto out = scratch("profile");
  const auto r = run_cli({"profile", "--input", (sim / "simulated.csv").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out / "profile.json"), slurp(kData / "profile_seed7.json"));
  EXPECT_EQ(slurp(out / "profile.csv"), slurp(kData / "profile_seed7.csv"));
}

TEST(CliDeterminism, RepeatedRunsAreByteIdentical) {
  const std::vector<std::vector<std::string>> commands{
      {"bounds", "--formulation", "f4", "--matches", "3"},
      {"sweep", "--formulation", "f1", "--eps", "0,0.5"},
      {"compare", "--formulation", "f1", "--eps", "0.5"},
      {"profile", "--quantiles", "0.25,0.5"},
  };
  for (const auto& cmd : commands) {
    std::vector<std::string> files;
    std::vector<std::string> first;
    for (int run = 0; run < 2; ++run) {
      const auto out = scratch(cmd[0] + std::to_string(run));
      auto args = cmd;
      args.insert(args.end(), {"--input", (kData / "fixture_4x6.csv").string(), "--out", out.string()});
      ASSERT_EQ(run_cli(args).code, 0) << cmd[0];
      std::vector<std::string> contents;
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(out)) names.push_back(entry.path().filename().string());
      std::sort(names.begin(), names.end());
      for (const auto& n : names) contents.push_back(slurp(out / n));
      if (run == 0) {
        files = names;
        first = contents;
      } else {
        EXPECT_EQ(names, files) << cmd[0];
        EXPECT_EQ(contents, first) << cmd[0];
      }
    }
    EXPECT_FALSE(files.empty());
  }
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  ASSERT_EQ(run_cli({"simulate", "--seed", "3", "--out", a.string()}).code, 0);
  ASSERT_EQ(run_cli({"simulate", "--seed", "3", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "simulated.csv"), slurp(b / "simulated.csv"));
  EXPECT_EQ(slurp(a / "hidden.csv"), slurp(b / "hidden.csv"));
}

TEST(CliRoundTrip, SimulatedCsvReloadsToFifteenDigits) {
  const auto out = scratch("sim");
  ASSERT_EQ(run_cli({"simulate", "--seed", "11", "--n-treated", "7", "--n-control", "9", "--out", out.string()}).code, 0);
  SyntheticModel model;
  model.beta_observed = {1.0, -0.5};
  model.propensity_observed = {0.5, 0.5};
  model.propensity_unobserved = {0.5};
  const auto direct = generate(model, 7, 9, 11).data;
  CsvSchema schema{"outcome", "treat", {"x1", "x2"}, std::string("id"), std::nullopt, std::nullopt};
  const auto loaded = load_dataset(out / "simulated.csv", schema);
  ASSERT_EQ(loaded.n_treated(), direct.n_treated());
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-15 * std::max(1.0, std::abs(a)); };
  for (std::size_t i = 0; i < direct.n_treated(); ++i) {
    EXPECT_TRUE(close(loaded.treated(i).outcome, direct.treated(i).outcome));
    for (std::size_t p = 0; p < 2; ++p) {
      EXPECT_TRUE(close(loaded.treated(i).covariates[p], direct.treated(i).covariates[p]));
    }
  }
  for (std::size_t j = 0; j < direct.n_control(); ++j) {
    EXPECT_TRUE(close(loaded.control(j).outcome, direct.control(j).outcome));
  }
}

TEST(CliRoundTrip, BoundsCsvNumbersMatchJson) {
  const auto out = scratch("run");
  ASSERT_EQ(run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4", "--matches",
                     "3", "--out", out.string()})
                .code,
            0);
  const auto j = nlohmann::json::parse(slurp(out / "bounds.json"));
  const auto lines = split_lines(slurp(out / "bounds.csv"));
  EXPECT_EQ(std::stod(split_cells(lines[1])[3]), j["bounds"]["upper"]["estimate"].get<double>());
  EXPECT_EQ(std::stod(split_cells(lines[2])[3]), j["bounds"]["lower"]["estimate"].get<double>());
  EXPECT_EQ(std::stod(split_cells(lines[1])[4]), j["bounds"]["upper"]["ci95"]["lower"].get<double>());
}

TEST(CliCompare, DiffCsvReconcilesWithJson) {
  const auto out = scratch("run");
  const auto r = run_cli({"compare", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f4",
                          "--matches", "3", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out / "diff.json"));
  const auto lines = split_lines(slurp(out / "diff.csv"));
  EXPECT_EQ(lines[0], "key,arm,lower_rows,upper_rows,lower_outcome_sum,upper_outcome_sum");
  std::size_t lower = 0;
  std::size_t upper = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto cells = split_cells(lines[k]);
    if (cells[1] != "control") continue;
    lower += std::stoul(cells[2]);
    upper += std::stoul(cells[3]);
  }
  EXPECT_EQ(lower, 3u);
  EXPECT_EQ(upper, 3u);
  EXPECT_EQ(j["lower_only"].get<std::size_t>() + j["shared_pairs"].get<std::size_t>(), 3u);
}

TEST(CliExitCodes, InfeasibleIsTwoWithDiagnosis) {
  const auto out = scratch("run");
  const auto r = run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--exact-on", "x1", "--out",
                          out.string()});
  EXPECT_EQ(r.code, cli::kExitInfeasible);
  const auto j = nlohmann::json::parse(slurp(out / "bounds.json"));
  EXPECT_FALSE(j["bounds"]["feasible"].get<bool>());
  EXPECT_EQ(j["bounds"]["infeasibility"]["binding_family"], "exact");
}

TEST(CliExitCodes, UsageAndIoErrorsAreOne) {
  const auto out = scratch("run");
  EXPECT_EQ(run_cli({"bounds", "--out", out.string()}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"bounds", "--input", "/nonexistent.csv", "--out", out.string()}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formulation", "f9", "--out",
                     out.string()})
                .code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"bounds", "--input", (kData / "fixture_4x6.csv").string(), "--formats", "xml", "--out",
                     out.string()})
                .code,
            cli::kExitUsage);
}

TEST(CliJsonErrors, StderrCarriesMachineReadableError) {
  const auto out = scratch("run");
  const auto r = run_cli({"bounds", "--input", "/nonexistent.csv", "--out", out.string(), "--json-errors"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"], "io");
  EXPECT_FALSE(j["message"].get<std::string>().empty());
  const auto u = run_cli({"bounds", "--bogus", "--json-errors"});
  EXPECT_EQ(nlohmann::json::parse(u.err)["error"], "usage");
}

TEST(SweepSvg, SinglePointHasMarkersButNoPath) {
  const auto svg = cli::render_sweep_svg(toy_sweep({{0.5, -0.5}}, 0.1));
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
  const std::regex circle("<circle ");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), circle), std::sregex_iterator()), 2);
  EXPECT_NE(svg.find("class=\"baseline\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"zero\""), std::string::npos);
}

TEST(SweepSvg, NestedSeriesAreMonotoneInRenderedData) {
  const auto svg = cli::render_sweep_svg(toy_sweep({{0.1, 0.0}, {0.3, -0.2}, {0.3, -0.6}}, 0.05));
  const std::regex marker("<circle class=\"(upper|lower)\"[^>]*data-epsilon=\"([^\"]+)\" data-estimate=\"([^\"]+)\"");
  std::vector<double> upper;
  std::vector<double> lower;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), marker); it != std::sregex_iterator(); ++it) {
    ((*it)[1] == "upper" ? upper : lower).push_back(std::stod((*it)[3]));
  }
  ASSERT_EQ(upper.size(), 3u);
  ASSERT_EQ(lower.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_GE(upper[k], upper[k - 1]);
    EXPECT_LE(lower[k], lower[k - 1]);
  }
  EXPECT_NE(svg.find("<polyline class=\"upper\""), std::string::npos);
}

TEST(SweepSvg, EmptySweepIsPreconditionError) {
  EXPECT_THROW(cli::render_sweep_svg(SweepResult{}), PreconditionError);
  const auto out = scratch("svg");
  cli::emit_sweep_svg(toy_sweep({{1, 0}}, 0.5), out / "s.svg");
  EXPECT_EQ(slurp(out / "s.svg").rfind("<svg", 0), 0u);
}
