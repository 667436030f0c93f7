#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynbath/correlators.hpp"
#include "dynbath/hamiltonian.hpp"
#include "dynbath/propagator.hpp"
#include "dynbath/states.hpp"
#include "dynbath/thermofit.hpp"

namespace dynbath {

using json = nlohmann::ordered_json;

std::string library_version();

// Sets the OpenMP and Eigen thread counts; zero leaves the defaults.
void set_thread_count(int threads);
// Reads DYNBATH_THREADS if set.
void apply_thread_environment();

struct TimeGridSpec {
  std::string kind = "linear";  // linear | log | list
  double start = 0.0;
  double stop = 0.0;
  std::size_t count = 0;
  bool include_zero = true;     // log grids only
  std::vector<double> values;   // list grids only

  std::vector<double> expand() const;
};

struct CorrelatorSpec {
  std::vector<double> com_times;
  std::vector<ModePair> pairs;          // single-particle, 0-based
  std::vector<ModePair> density_pairs;  // occupation correlators, 0-based
  double tau_max = 10.0;
  double tau_step = 0.01;
  std::string energy_grid = "nyquist";  // nyquist | uniform
  std::size_t oversample = 4;
  double e_min = -20.0, e_max = 80.0, e_step = 0.05;
  WindowKind window = WindowKind::Hann;
};

// All mode indices are 0-based here; the JSON file uses 1-based levels.
struct RunConfig {
  HamiltonianParams model;

  std::optional<double> time_step;  // empty means automatic
  int taylor_order = 4;
  int branching = 2;
  std::optional<int> depth;         // empty means automatic
  double tolerance = 1e-7;
  StepNorm step_norm = StepNorm::MaxElement;
  bool renormalize = false;
  bool snap = true;
  double ladder_memory_gib = 3.0;

  std::string initial_kind = "occupation";  // occupation | microcanonical
  std::vector<int> occupation;
  double window_min = 0.0, window_max = 0.0;
  PhaseConvention phases = PhaseConvention::Positive;

  std::vector<std::size_t> system_modes;
  std::vector<std::string> observables{"entropy", "occupations", "energy"};
  std::optional<TimeGridSpec> times;
  std::optional<CorrelatorSpec> correlators;
  std::optional<std::pair<double, double>> chaos_window;

  std::size_t peak_count = 0;       // 0 means one per mode
  EnergyWindow beta_window = kDefaultBetaWindow;
  double tail_fraction = 0.2;
  bool connected_density = true;
  std::vector<std::string> relaxation{"entropy", "n_sys"};

  std::filesystem::path output_directory = "dynbath_out";
  std::uint64_t seed = 0;
  std::size_t dimension_cap = FockBasis::kDefaultDimensionCap;

  json source;  // the parsed document, echoed into the manifest

  static RunConfig from_json(const json& doc);
  json resolved() const;
};

RunConfig load_config(const std::filesystem::path& path);

enum class Stage { BuildSpectrum, Evolve, Greens, Thermometry, Chaos, Fit };

std::string stage_name(Stage stage);
Stage parse_stage(const std::string& name);
// Stages that must have run before this one.
std::vector<Stage> stage_dependencies(Stage stage);

class Runner {
 public:
  explicit Runner(RunConfig config);

  const RunConfig& config() const { return config_; }

  // Runs one stage. Missing prerequisite artifacts raise MissingArtifact
  // naming the producing stage unless with_dependencies is set.
  void run_stage(Stage stage, bool with_dependencies = false);
  // All stages the configuration asks for, in pipeline order.
  json run_all();

  const json& manifest() const { return manifest_; }
  std::filesystem::path manifest_path() const;

 private:
  struct Propagation {
    double time_step = 0.0;
    int halvings = 0;
    double error_estimate = 0.0;
    double unit = 1.0;
  };

  BasisPtr sector(int particles);
  const SectorOperator& hamiltonian(int particles);
  const EigenSystem& eigensystem();
  LadderPtr ladder(int particles, double horizon);
  StateVector initial_state();
  const Propagation& propagation();
  double evolve_horizon() const;
  double greens_horizon() const;

  void stage_build_spectrum();
  void stage_evolve();
  void stage_greens();
  void stage_thermometry();
  void stage_chaos();
  void stage_fit();
  bool stage_applicable(Stage stage) const;
  bool stage_done(Stage stage) const;
  void require_artifact(const std::filesystem::path& rel, Stage producer) const;

  void load_manifest();
  void write_manifest();
  void record_stage(Stage stage, const std::string& status, double seconds, const std::string& error);
  void write_json(const std::filesystem::path& rel, const json& doc);

  RunConfig config_;
  std::filesystem::path out_;
  json manifest_;
  std::unique_ptr<SectorCache> cache_;
  std::map<int, SectorOperator> hamiltonians_;
  std::optional<EigenSystem> eigensystem_;
  std::optional<Propagation> propagation_;
  std::map<int, LadderPtr> ladders_;
  std::map<int, double> ladder_horizon_;
};

// Loads a CSV written by write_spectrum_csv as a one-row spectrum.
CorrelatorSpectrum load_spectrum_csv(const std::filesystem::path& path, CorrelatorKind kind,
                                     const TauGrid& grid, WindowKind window, std::size_t num_modes);

// Hex SHA-256 of a file.
std::string file_sha256(const std::filesystem::path& path);

json to_json(const TemperatureFit& fit);
json to_json(const PeakSet& peaks);
json to_json(const RelaxationFit& fit);
json to_json(const ChaosReport& report);

}  // namespace dynbath
