#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "folspec/cli.hpp"
#include "folspec/config.hpp"

using folspec::ConfigError;
using folspec::ExperimentConfig;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("cli_test_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig config_from(const std::string& text) {
  ExperimentConfig cfg = folspec::parse_config(nlohmann::json::parse(text));
  cfg.config_hash = folspec::hex16(folspec::fnv1a64(text));
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream stream(path, std::ios::binary);
  REQUIRE(stream.good());
  std::stringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

// data rows only: skip '#' comments and the header line
std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::stringstream stream(csv);
  std::string line;
  bool header_seen = false;
  while (std::getline(stream, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

TEST_CASE("bare config resolves to the recorded defaults") {
  const ExperimentConfig cfg = config_from("{}");
  CHECK(cfg.model.type == "flat");
  CHECK(cfg.model.flat.n == 2);
  CHECK(cfg.model.flat.p == 1);
  CHECK(cfg.model.flat.span[0][1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cfg.h_schedule == std::vector<double>{0.2, 0.1, 0.05, 0.025});
  CHECK(cfg.lambda_grid.size() == 10);
  CHECK(cfg.lambda_grid.front() == 10.0);
  CHECK(cfg.lambda_grid.back() == 100.0);
  CHECK(cfg.lambda_max == 100.0);
  CHECK(cfg.seed == 0x5eed);
  CHECK(cfg.workers == 1);
  CHECK(cfg.model.label() == "flat2p1");
}

TEST_CASE("config validation names the offending field") {
  auto message_of = [](const std::string& text) {
    try {
      config_from(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };

  CHECK(message_of(R"({"h_schedule": [0.2, 0.0]})").find("h_schedule[1]") !=
        std::string::npos);
  CHECK(message_of(R"({"h_schedule": [2.0]})").find("h_schedule[0]") != std::string::npos);
  CHECK(message_of(R"({"model": {"type": "weird"}})").find("model.type") != std::string::npos);
  CHECK(message_of(R"({"modle": {}})").find("unknown field \"modle\"") != std::string::npos);
  CHECK(message_of(R"({"model": {"flat": {"span": [[1.0]]}}})").find("model.flat.span") !=
        std::string::npos);
  CHECK(message_of(R"({"model": {"flat": {"span": [["x", 1.0]]}}})")
            .find("model.flat.span[0][0]") != std::string::npos);
  CHECK(message_of(R"({"model": {"fibered": {"b": "2^3"}}})").find("model.fibered.b") !=
        std::string::npos);
  CHECK(message_of(R"({"grade": {"j": 5}})").find("grade.j") != std::string::npos);
  CHECK(message_of(R"({"workers": 0})").find("workers") != std::string::npos);
  CHECK(message_of(R"({"seed": -4})").find("seed") != std::string::npos);
  CHECK(message_of(R"({"lambda_grid": [5.0, 5.0]})").find("lambda_grid[1]") !=
        std::string::npos);
  CHECK(message_of(R"({"t_values": []})").find("t_values") != std::string::npos);

  // geometric schedule expansion
  const ExperimentConfig geo =
      config_from(R"({"h_schedule": {"h0": 0.4, "factor": 0.5, "count": 3}})");
  REQUIRE(geo.h_schedule.size() == 3);
  CHECK(geo.h_schedule[0] == 0.4);
  CHECK(geo.h_schedule[1] == 0.2);
  CHECK(geo.h_schedule[2] == 0.1);
}

TEST_CASE("spectrum rows expand atom multiplicities to the counting total") {
  const auto out = fresh_dir("spectrum_rows");
  ExperimentConfig cfg = config_from(
      R"({"h_schedule": [0.05], "lambda_max": 100.0, "out_dir": ")" + out.generic_string() +
      R"("})");
  std::ostringstream log;
  REQUIRE(folspec::cmd_spectrum(cfg, log) == 0);

  const auto model = folspec::build_flat_from_config(cfg);
  const long long expected = folspec::count_modes(model, {0, 0}, 0.05, 100.0);
  const std::string stem = folspec::cli_detail::file_stem(cfg, "spectrum");
  const std::string csv = slurp(out / (stem + ".csv"));
  const auto rows = data_rows(csv);
  CHECK(static_cast<long long>(rows.size()) == expected);

  // stamped with tool version and config hash
  CHECK(csv.find("folspec 0.1.0 config " + cfg.config_hash) != std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(out / (stem + ".json")));
  CHECK(manifest["tool"]["version"] == "0.1.0");
  CHECK(manifest["config_hash"] == cfg.config_hash);
  CHECK(manifest["runs"][0]["count"] == expected);
  CHECK(manifest["runs"][0]["complete"] == true);
}

TEST_CASE("spectrum lists the zero mode first at h = 1") {
  const auto out = fresh_dir("spectrum_zero");
  ExperimentConfig cfg = config_from(R"({"h_schedule": [1.0], "lambda_max": 50.0, "out_dir": ")" +
                                     out.generic_string() + R"("})");
  std::ostringstream log;
  REQUIRE(folspec::cmd_spectrum(cfg, log) == 0);
  fs::path csv_path;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().extension() == ".csv") csv_path = entry.path();
  const auto rows = data_rows(slurp(csv_path));
  REQUIRE(!rows.empty());
  const auto fields = split_csv(rows.front());
  REQUIRE(fields.size() == 3);
  CHECK(fields[0] == "1");
  CHECK(fields[1] == "0");  // leafwise-harmonic constant mode
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  const auto out_a = fresh_dir("repeat_a");
  const auto out_b = fresh_dir("repeat_b");
  const std::string body = R"({"h_schedule": [0.2, 0.1], "lambda_max": 80.0})";
  std::ostringstream log;

  auto run_into = [&](const fs::path& dir) {
    ExperimentConfig cfg = config_from(body);  // hash of the shared body text
    cfg.out_dir = dir.generic_string();
    REQUIRE(folspec::cmd_spectrum(cfg, log) == 0);
  };
  run_into(out_a);
  run_into(out_b);

  for (const auto& entry : fs::directory_iterator(out_a)) {
    const fs::path twin = out_b / entry.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(slurp(entry.path()) == slurp(twin));
  }
}

TEST_CASE("sweep output is invariant under the worker count") {
  const std::string base = R"({"model": {"flat": {"span": [[1.0, 0.0]]}, "id": "axis"},
                               "h_schedule": [0.2, 0.1, 0.05],
                               "lambda_grid": [20.0, 60.0, 100.0]})";
  std::ostringstream log;
  const auto out_serial = fresh_dir("sweep_w1");
  const auto out_parallel = fresh_dir("sweep_w3");

  ExperimentConfig cfg = config_from(base);
  cfg.out_dir = out_serial.generic_string();
  cfg.workers = 1;
  REQUIRE(folspec::cmd_sweep(cfg, log) == 0);
  cfg.out_dir = out_parallel.generic_string();
  cfg.workers = 3;
  REQUIRE(folspec::cmd_sweep(cfg, log) == 0);

  int compared = 0;
  for (const auto& entry : fs::directory_iterator(out_serial)) {
    const fs::path twin = out_parallel / entry.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(slurp(entry.path()) == slurp(twin));
    ++compared;
  }
  CHECK(compared == 3);  // cells CSV, leafwise CSV, manifest

  // sweep cells CSV has one row per (h, lambda) and no missing cells
  const std::string stem = folspec::cli_detail::file_stem(cfg, "sweep");
  const auto manifest = nlohmann::json::parse(slurp(out_serial / (stem + ".json")));
  CHECK(manifest["flags_empty"] == true);
  CHECK(manifest["missing_cells"] == 0);
  CHECK(manifest["rhs"].size() == 3);
  CHECK(manifest["fitted_exponent"].size() == 3);
  CHECK(manifest["fitted_exponent"][2]["neg_infinity"] == false);
  const auto rows = data_rows(slurp(out_serial / (stem + ".csv")));
  CHECK(rows.size() == 9);
}

TEST_CASE("sweep reports budget-starved cells as missing instead of failing") {
  const auto out = fresh_dir("sweep_budget");
  ExperimentConfig cfg = config_from(
      R"({"h_schedule": [0.2, 0.1, 0.05], "lambda_grid": [20.0, 100.0],
          "budgets": {"candidate_cap": 300}})");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  REQUIRE(folspec::cmd_sweep(cfg, log) == 0);
  fs::path json_path;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().extension() == ".json") json_path = entry.path();
  const auto manifest = nlohmann::json::parse(slurp(json_path));
  CHECK(manifest["missing_cells"].get<long long>() > 0);
  CHECK(manifest["all_cells_present"] == false);
}

TEST_CASE("heat ratios approach one as h shrinks") {
  const auto out = fresh_dir("heat_ratio");
  ExperimentConfig cfg = config_from(
      R"({"h_schedule": [0.1, 0.05], "t_values": [0.5], "lambda_max": 100.0})");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  REQUIRE(folspec::cmd_heat(cfg, log) == 0);
  fs::path csv_path;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().extension() == ".csv") csv_path = entry.path();
  const auto rows = data_rows(slurp(csv_path));
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    const auto fields = split_csv(row);
    REQUIRE(fields.size() == 6);
    CHECK(std::abs(std::stod(fields[4]) - 1.0) < 0.05);  // ratio column
    CHECK(fields[5] == "1");                             // tail negligible
  }
}

TEST_CASE("branches manifest records the adiabatic limits and ordering") {
  const auto out = fresh_dir("branches_axis");
  ExperimentConfig cfg = config_from(
      R"({"model": {"flat": {"span": [[1.0, 0.0]]}, "id": "axis"},
          "h_schedule": [0.2, 0.1, 0.05], "branch_count": 6})");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  REQUIRE(folspec::cmd_branches(cfg, log) == 0);
  const std::string stem = folspec::cli_detail::file_stem(cfg, "branches");
  const auto manifest = nlohmann::json::parse(slurp(out / (stem + ".json")));
  CHECK(manifest["limit_summary"]["ordering_ok"] == true);
  CHECK(manifest["limit_summary"]["lambda_lim_0"] == 0.0);
  CHECK(manifest["limit_summary"]["lambda_F_0"] == 0.0);
  const double gap = manifest["limit_summary"]["smallest_positive_limit"].get<double>();
  CHECK(std::abs(gap - 39.478417604357434) < 1e-9);
  const auto rows = data_rows(slurp(out / (stem + ".csv")));
  CHECK(rows.size() == 18);  // 6 branches, 3 scheduled h each
  CHECK(manifest["branches"].size() == 6);
  CHECK(manifest["branches"][0]["matching"] == "analytic-mode");
}

TEST_CASE("verify rejects a transverse metric with leaf dependence at its criterion") {
  const auto out = fresh_dir("verify_bad_b");
  ExperimentConfig cfg = config_from(
      R"cfg({"model": {"type": "fibered",
                       "fibered": {"nx": 16, "ny": 16, "a": "1", "b": "1 + 0.1*cos(2*pi*x)"}}})cfg");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  const int code = folspec::cmd_verify(cfg, log);
  CHECK(code == 7);
  CHECK(log.str().find("[ 7] FAIL") != std::string::npos);
  CHECK(log.str().find("varies along the leaf") != std::string::npos);
}

TEST_CASE("verify surfaces an exponent schedule that is too short to fit") {
  const auto out = fresh_dir("verify_short_schedule");
  ExperimentConfig cfg = config_from(
      R"({"h_schedule": [0.2, 0.1],
          "model": {"fibered": {"nx": 16, "ny": 16}}})");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  const int code = folspec::cmd_verify(cfg, log);
  CHECK(code == 9);
  CHECK(log.str().find("at least 3") != std::string::npos);
}

TEST_CASE("verify passes on the default config") {
  const auto out = fresh_dir("verify_default");
  ExperimentConfig cfg = config_from("{}");
  cfg.out_dir = out.generic_string();
  std::ostringstream log;
  const int code = folspec::cmd_verify(cfg, log);
  CAPTURE(log.str());
  CHECK(code == 0);
  const auto report = nlohmann::json::parse(slurp(out / "verify_report.json"));
  CHECK(report["pass"] == true);
  CHECK(report["first_failure"] == 0);
  CHECK(report["checks"].size() == 17);
}
