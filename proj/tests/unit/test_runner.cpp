#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sys/wait.h>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"
#include "dynbath/runner.hpp"

using namespace dynbath;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynbath_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json rabi_config(const fs::path& out) {
  json j = json::parse(R"({
    "model": {"modes": 2, "particles": 1, "level_spacing": 0.0},
    "propagation": {"time_step": 0.01, "taylor_order": 8},
    "initial_state": {"kind": "occupation", "occupation": [1, 0]},
    "measurement": {"system_modes": [2], "times": {"kind": "linear", "start": 0, "stop": 5, "count": 101}},
    "fit": {"relaxation": []}
  })");
  j["output"] = {{"directory", out.string()}};
  return j;
}

json small_config(const fs::path& out) {
  json j = json::parse(R"({
    "model": {"modes": 3, "particles": 3},
    "propagation": {"taylor_order": 10},
    "initial_state": {"kind": "occupation", "occupation": [3, 0, 0]},
    "measurement": {
      "system_modes": [2, 3],
      "times": {"kind": "linear", "start": 0, "stop": 20, "count": 201},
      "correlators": {"com_times": [0, 1.5], "pairs": "diagonal", "density_pairs": [[1, 2], [2, 1]],
                      "tau_max": 2.0, "tau_step": 0.02}
    },
    "seed": 4
  })");
  j["output"] = {{"directory", out.string()}};
  return j;
}

void write(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("DYNBATH_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("Rabi configuration writes sin^2 occupations") {
  const auto dir = scratch("rabi");
  Runner runner(RunConfig::from_json(rabi_config(dir)));
  runner.run_all();
  const auto table = read_csv(dir / "occupations.csv");
  const auto t = table.values("Jt");
  const auto n2 = table.values("n_2");
  REQUIRE(t.size() == 101);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(n2[k] == doctest::Approx(std::pow(std::sin(t[k]), 2)).epsilon(1e-6));
  CHECK(table.values("n_sys") == n2);
  const auto& m = runner.manifest();
  CHECK(m["drift"]["norm_max"].get<double>() <= 1e-6);
  CHECK(m["stages"]["evolve"]["status"] == "ok");
  for (const auto& entry : m["files"])
    CHECK(file_sha256(dir / entry["path"].get<std::string>()) == entry["sha256"].get<std::string>());
}

TEST_CASE("numbers round-trip through CSV") {
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 100; ++k) {
    const double x = u(rng) * std::pow(10.0, k % 40 - 20);
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("full small pipeline is reproducible") {
  const auto a = scratch("small_a"), b = scratch("small_b");
  Runner ra(RunConfig::from_json(small_config(a)));
  ra.run_all();
  Runner rb(RunConfig::from_json(small_config(b)));
  rb.run_all();
  const auto& m = ra.manifest();
  for (const char* stage : {"build-spectrum", "chaos", "evolve", "fit", "greens", "thermometry"})
    CHECK(m["stages"][stage]["status"] == "ok");
  for (const auto& entry : m["files"]) {
    const std::string name = entry["path"].get<std::string>();
    CHECK(fs::exists(b / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(fs::exists(a / "entropy.csv"));
  CHECK(fs::exists(a / "relaxation.json"));
  CHECK(fs::exists(a / "chaos.json"));
  CHECK(fs::exists(a / "greens" / "index.json"));
  const auto idx = json::parse(slurp(a / "greens" / "index.json"));
  CHECK(idx.contains("tau_step"));
  const auto s = read_csv(a / "entropy.csv");
  CHECK(s.values("S")[0] <= 1e-10);
}

TEST_CASE("stages report missing artifacts") {
  const auto dir = scratch("stages");
  Runner runner(RunConfig::from_json(small_config(dir)));
  CHECK_THROWS_AS(runner.run_stage(Stage::Chaos), MissingArtifact);
  CHECK_NOTHROW(runner.run_stage(Stage::Chaos, true));
  CHECK(fs::exists(dir / "eigenvalues.csv"));
  CHECK(parse_stage("thermometry") == Stage::Thermometry);
  CHECK_THROWS_AS(parse_stage("plot"), ValidationError);
}

TEST_CASE("zero depth snaps to base steps") {
  const auto dir = scratch("depth0");
  auto cfg = rabi_config(dir);
  cfg["propagation"]["depth"] = 0;
  cfg["measurement"]["times"] = {{"kind", "list"}, {"values", {0.0, 0.013, 0.05}}};
  Runner runner(RunConfig::from_json(cfg));
  runner.run_all();
  const auto t = read_csv(dir / "occupations.csv").values("Jt");
  CHECK(t[1] == doctest::Approx(0.01));
  CHECK(t[2] == doctest::Approx(0.05));
}

TEST_CASE("configuration validation") {
  const auto dir = scratch("bad");
  auto cfg = rabi_config(dir);
  cfg["model"]["bogus"] = 1;
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg = rabi_config(dir);
  cfg["measurement"]["system_modes"] = {3};
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg = rabi_config(dir);
  cfg["initial_state"]["occupation"] = {1, 1};
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg = rabi_config(dir);
  cfg["measurement"]["times"]["start"] = -1;
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg = rabi_config(dir);
  cfg["measurement"]["observables"] = {"occupations"};
  cfg["fit"]["relaxation"] = {"entropy"};
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg["measurement"]["observables"] = {"entropy"};
  cfg["fit"]["relaxation"] = {"n_sys"};
  CHECK_THROWS_AS(RunConfig::from_json(cfg), ValidationError);
  cfg = rabi_config(dir);
  cfg.erase("measurement");
  cfg["model"]["modes"] = 3;
  cfg["initial_state"]["occupation"] = {1, 0, 0};
  CHECK_NOTHROW(RunConfig::from_json(cfg));  // spectrum-only run needs no partition
  cfg = rabi_config(dir);
  cfg["model"] = {{"modes", 5}, {"particles", 25}};
  cfg["initial_state"] = {{"kind", "occupation"}};
  cfg["measurement"] = {{"system_modes", {3, 4, 5}}};
  cfg["dimension_cap"] = 1000;
  CHECK_THROWS_AS(RunConfig::from_json(cfg), CapacityError);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  write(dir / "rabi.json", rabi_config(dir / "out"));
  CHECK(run_cli("run " + (dir / "rabi.json").string()) == 0);
  CHECK(fs::exists(dir / "out" / "manifest.json"));

  auto bad = rabi_config(dir / "out2");
  bad["model"]["modes"] = 0;
  write(dir / "bad.json", bad);
  CHECK(run_cli("run " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("run " + (dir / "missing.json").string()) == 2);
  // Two levels give no gap ratio.
  CHECK(run_cli("chaos " + (dir / "rabi.json").string()) == 2);
  write(dir / "small.json", small_config(dir / "out3"));
  CHECK(run_cli("chaos --deps " + (dir / "small.json").string()) == 0);
  CHECK(run_cli("greens " + (dir / "small.json").string() + " --pair 1,2 --time 0.5") == 0);
  CHECK(fs::exists(dir / "out3" / "greens" / "index.json"));
  CHECK(run_cli("greens " + (dir / "small.json").string() + " --pair 1,9") == 2);
  CHECK(run_cli("nonsense") == 2);

  {
    CsvWriter w(dir / "be.csv", {"E_over_J", "n_B", "sigma"});
    for (double e : {5.0, 10.0, 20.0}) w.row({e, 1.0 / (std::exp(e / 30.0) - 1.0), 0.01});
  }
  CHECK(run_cli("fit " + (dir / "be.csv").string() + " --model bose -o " + (dir / "be.json").string()) == 0);
  const auto fit = json::parse(slurp(dir / "be.json"));
  CHECK(fit["temperature"].get<double>() == doctest::Approx(30.0).epsilon(1e-6));

  {
    CsvWriter w(dir / "flat.csv", {"E_over_J", "forward", "reversed"});
    for (double e : {3.0, 4.0}) w.row({e, 1.0, 1.0});
  }
  CHECK(run_cli("fit " + (dir / "flat.csv").string() + " --model fdt") == 2);
}
