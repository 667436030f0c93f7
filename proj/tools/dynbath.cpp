// Command-line front end: pipeline stages and standalone fits.
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"
#include "dynbath/runner.hpp"

namespace {

using namespace dynbath;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

ModePair parse_pair_option(const std::string& text, std::size_t modes) {
  std::istringstream in(text);
  long i = 0, j = 0;
  char comma = 0;
  if (!(in >> i >> comma >> j) || comma != ',' || !in.eof())
    throw ValidationError("--pair expects two levels as i,j");
  if (i < 1 || j < 1 || static_cast<std::size_t>(i) > modes || static_cast<std::size_t>(j) > modes)
    throw ValidationError("--pair levels must lie in 1.." + std::to_string(modes));
  return {static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)};
}

json fit_file(const std::string& path, const std::string& model, const std::string& column,
              double tail_fraction, std::uint64_t seed, EnergyWindow window) {
  const CsvTable table = read_csv(path);
  if (model == "biexp") {
    if (table.header.size() < 2) throw ValidationError(path + " needs a time column and a value column");
    const std::string value = column.empty() ? table.header[1] : column;
    const auto t = table.values(table.header[0]);
    const auto y = table.values(value);
    const PlateauStats plateau = plateau_stats(y, tail_fraction);
    json doc = to_json(fit_biexponential(t, y, plateau.mean, plateau.std, seed));
    doc["series"] = value;
    doc["plateau_count"] = plateau.count;
    return doc;
  }
  if (model == "bose") {
    const auto e = table.values("E_over_J");
    const auto n = table.values("n_B");
    const auto s = table.values("sigma");
    std::vector<FdtPoint> pts;
    for (std::size_t k = 0; k < e.size(); ++k) pts.push_back({e[k], n[k], s[k], n[k] < 0.0});
    return to_json(fit_bose_einstein(pts, seed));
  }
  if (model == "fdt") {
    const auto e = table.values("E_over_J");
    const auto f = table.values("forward");
    const auto r = table.values("reversed");
    return to_json(fit_fdt_beta(e, f, r, window));
  }
  throw ValidationError("--model must be biexp, bose or fdt");
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact dynamics and thermometry for few-level trapped Bose gases"};
  app.set_version_flag("--version", library_version());
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides DYNBATH_THREADS)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every stage the configuration asks for");
  run->add_option("config", config_path, "JSON run configuration")->required();

  bool with_deps = false;
  std::vector<std::pair<Stage, CLI::App*>> stage_cmds;
  const std::vector<std::pair<Stage, std::string>> stages{
      {Stage::BuildSpectrum, "Diagonalize the sector and write the initial-state spectrum"},
      {Stage::Evolve, "Evolve the initial state and log observables"},
      {Stage::Greens, "Two-time correlators and their energy spectra"},
      {Stage::Thermometry, "Fluctuation-dissipation temperature fits"},
      {Stage::Chaos, "Adjacent-gap ratio of the spectrum"},
  };
  std::string pair_text;
  double com_time = -1.0;
  for (const auto& [stage, help] : stages) {
    auto* cmd = app.add_subcommand(stage_name(stage), help);
    cmd->add_option("config", config_path, "JSON run configuration")->required();
    cmd->add_flag("--deps", with_deps, "Run missing prerequisite stages first");
    if (stage == Stage::Greens) {
      cmd->add_option("--pair", pair_text, "Single mode pair i,j (1-based levels)");
      cmd->add_option("--time", com_time, "Single center-of-motion time");
    }
    stage_cmds.emplace_back(stage, cmd);
  }

  std::string fit_target, fit_model = "biexp", column, output;
  double tail_fraction = 0.2;
  std::uint64_t seed = 0;
  std::vector<double> window{kDefaultBetaWindow.first, kDefaultBetaWindow.second};
  auto* fit = app.add_subcommand("fit", "Relaxation fit of a run, or a standalone fit of one CSV file");
  fit->add_option("target", fit_target, "Run configuration (.json) or data file (.csv)")->required();
  fit->add_option("--model", fit_model, "biexp | bose | fdt (CSV input only)")
      ->check(CLI::IsMember({"biexp", "bose", "fdt"}));
  fit->add_option("--column", column, "Value column for biexp (default: second column)");
  fit->add_option("--tail-fraction", tail_fraction, "Plateau tail fraction for biexp");
  fit->add_option("--seed", seed, "Multi-start seed");
  fit->add_option("--window", window, "Energy window lo hi for fdt")->expected(2);
  fit->add_option("-o,--output", output, "Write the JSON report here instead of stdout");
  fit->add_flag("--deps", with_deps, "Run missing prerequisite stages first (config input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  apply_thread_environment();
  if (threads > 0) set_thread_count(threads);

  return guarded([&] {
    if (*run) {
      Runner runner(load_config(config_path));
      runner.run_all();
      std::cout << runner.manifest_path().string() << '\n';
      return;
    }
    for (const auto& [stage, cmd] : stage_cmds) {
      if (!*cmd) continue;
      RunConfig cfg = load_config(config_path);
      if (stage == Stage::Greens && (!pair_text.empty() || com_time >= 0.0)) {
        if (!cfg.correlators) cfg.correlators = CorrelatorSpec{};
        if (!pair_text.empty()) {
          cfg.correlators->pairs = {parse_pair_option(pair_text, cfg.model.num_modes)};
          cfg.correlators->density_pairs.clear();
        }
        if (com_time >= 0.0) cfg.correlators->com_times = {com_time};
        if (cfg.correlators->pairs.empty() && cfg.correlators->density_pairs.empty())
          throw ValidationError("greens needs --pair or configured pairs");
      }
      Runner runner(std::move(cfg));
      runner.run_stage(stage, with_deps);
      std::cout << runner.manifest_path().string() << '\n';
      return;
    }
    if (*fit) {
      if (fit_target.size() > 4 && fit_target.substr(fit_target.size() - 4) == ".csv") {
        const json doc = fit_file(fit_target, fit_model, column, tail_fraction, seed, {window[0], window[1]});
        if (output.empty()) {
          std::cout << doc.dump(2) << '\n';
        } else {
          std::ofstream out(output);
          if (!out) throw ValidationError("cannot write " + output);
          out << doc.dump(2) << '\n';
        }
        return;
      }
      Runner runner(load_config(fit_target));
      runner.run_stage(Stage::Fit, with_deps);
      std::cout << runner.manifest_path().string() << '\n';
    }
  });
}
