#include "dynbath/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <omp.h>
#include <openssl/evp.h>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"
#include "dynbath/partition.hpp"
#include "dynbath/states.hpp"

#ifndef DYNBATH_VERSION
#define DYNBATH_VERSION "0.0.0"
#endif

namespace dynbath {

namespace fs = std::filesystem;

std::string library_version() { return DYNBATH_VERSION; }

void set_thread_count(int threads) {
  if (threads <= 0) return;
  omp_set_num_threads(threads);
  Eigen::setNbThreads(threads);
}

void apply_thread_environment() {
  const char* env = std::getenv("DYNBATH_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ValidationError("DYNBATH_THREADS must be a positive integer");
  set_thread_count(static_cast<int>(n));
}

std::vector<double> TimeGridSpec::expand() const {
  std::vector<double> out;
  if (kind == "list") {
    out = values;
  } else if (kind == "linear") {
    if (count == 1) {
      out.push_back(start);
    } else {
      for (std::size_t k = 0; k < count; ++k)
        out.push_back(start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
  } else if (kind == "log") {
    if (include_zero) out.push_back(0.0);
    for (std::size_t k = 0; k < count; ++k) {
      const double f = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
      out.push_back(start * std::pow(stop / start, f));
    }
  } else {
    throw ValidationError("unknown time grid kind '" + kind + "'");
  }
  return out;
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ValidationError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + " has the wrong type");
  }
}

template <typename T>
T get_required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + "." + key + " is required");
  return get_or<T>(obj, key, T{}, where);
}

std::size_t level_index(long level, std::size_t modes, const std::string& where) {
  if (level < 1 || static_cast<std::size_t>(level) > modes) {
    std::ostringstream msg;
    msg << where << ": level " << level << " is outside 1.." << modes;
    throw ValidationError(msg.str());
  }
  return static_cast<std::size_t>(level - 1);
}

std::vector<ModePair> parse_pairs(const json& value, std::size_t modes, const std::string& where) {
  std::vector<ModePair> out;
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "diagonal") {
      for (std::size_t i = 0; i < modes; ++i) out.push_back({i, i});
      return out;
    }
    throw ValidationError(where + " must be a list of [i, j] pairs or \"diagonal\"");
  }
  if (!value.is_array()) throw ValidationError(where + " must be a list of [i, j] pairs");
  for (const auto& p : value) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
      throw ValidationError(where + " entries must be [i, j] integer pairs");
    ModePair mp{level_index(p[0].get<long>(), modes, where), level_index(p[1].get<long>(), modes, where)};
    if (std::find(out.begin(), out.end(), mp) == out.end()) out.push_back(mp);
  }
  return out;
}

std::pair<double, double> parse_window_pair(const json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
    throw ValidationError(where + " must be [low, high]");
  const double lo = value[0].get<double>(), hi = value[1].get<double>();
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError(where + " needs low <= high");
  return {lo, hi};
}

TimeGridSpec parse_times(const json& t) {
  const std::string where = "measurement.times";
  check_keys(t, {"kind", "start", "stop", "count", "include_zero", "values"}, where);
  TimeGridSpec g;
  g.kind = get_or<std::string>(t, "kind", "linear", where);
  if (g.kind == "list") {
    g.values = get_required<std::vector<double>>(t, "values", where);
    if (g.values.empty()) throw ValidationError(where + ".values is empty");
  } else if (g.kind == "linear" || g.kind == "log") {
    g.start = get_required<double>(t, "start", where);
    g.stop = get_required<double>(t, "stop", where);
    g.count = get_required<std::size_t>(t, "count", where);
    g.include_zero = get_or<bool>(t, "include_zero", true, where);
    if (g.count < 1) throw ValidationError(where + ".count must be positive");
    if (!(g.stop >= g.start)) throw ValidationError(where + " needs stop >= start");
    if (g.kind == "log" && !(g.start > 0.0)) throw ValidationError(where + ": log grids need start > 0");
  } else {
    throw ValidationError(where + ".kind must be linear, log or list");
  }
  for (double v : g.expand())
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(where + " contains a negative or non-finite time");
  return g;
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig c;
  c.source = doc;
  check_keys(doc, {"model", "propagation", "initial_state", "measurement", "chaos", "fit", "output", "seed",
                   "dimension_cap"},
             "config");

  c.dimension_cap = get_or<std::size_t>(doc, "dimension_cap", FockBasis::kDefaultDimensionCap, "config");

  const json model = doc.value("model", json::object());
  check_keys(model, {"modes", "particles", "level_spacing", "hopping", "intra_level", "inter_level"}, "model");
  const long modes = get_required<long>(model, "modes", "model");
  const long particles = get_required<long>(model, "particles", "model");
  if (modes < 1) throw ValidationError("model.modes must be at least 1");
  if (particles < 0) throw ValidationError("model.particles must be nonnegative");
  c.model.num_modes = static_cast<std::size_t>(modes);
  c.model.num_particles = static_cast<int>(particles);
  c.model.level_spacing = get_or<double>(model, "level_spacing", 10.0, "model");
  c.model.hopping = get_or<double>(model, "hopping", 1.0, "model");
  c.model.intra_level = get_or<double>(model, "intra_level", 1.0, "model");
  c.model.inter_level = get_or<double>(model, "inter_level", 0.1, "model");
  c.model.validate();
  const std::size_t M = c.model.num_modes;
  const int N = c.model.num_particles;

  const json prop = doc.value("propagation", json::object());
  check_keys(prop, {"time_step", "taylor_order", "branching", "depth", "tolerance", "step_norm", "renormalize",
                    "snap", "ladder_memory_gib"},
             "propagation");
  if (prop.contains("time_step") && !(prop["time_step"].is_string() && prop["time_step"] == "auto")) {
    c.time_step = get_or<double>(prop, "time_step", 0.0, "propagation");
    if (!(*c.time_step > 0.0)) throw ValidationError("propagation.time_step must be positive or \"auto\"");
  }
  c.taylor_order = get_or<int>(prop, "taylor_order", 4, "propagation");
  c.branching = get_or<int>(prop, "branching", 2, "propagation");
  if (prop.contains("depth") && !(prop["depth"].is_string() && prop["depth"] == "auto")) {
    c.depth = get_or<int>(prop, "depth", 0, "propagation");
    if (*c.depth < 0) throw ValidationError("propagation.depth must be nonnegative or \"auto\"");
  }
  c.tolerance = get_or<double>(prop, "tolerance", 1e-7, "propagation");
  const std::string norm = get_or<std::string>(prop, "step_norm", "max_element", "propagation");
  if (norm == "max_element") c.step_norm = StepNorm::MaxElement;
  else if (norm == "spectral") c.step_norm = StepNorm::Spectral;
  else throw ValidationError("propagation.step_norm must be max_element or spectral");
  c.renormalize = get_or<bool>(prop, "renormalize", false, "propagation");
  c.snap = get_or<bool>(prop, "snap", true, "propagation");
  c.ladder_memory_gib = get_or<double>(prop, "ladder_memory_gib", 3.0, "propagation");
  if (c.taylor_order < 2) throw ValidationError("propagation.taylor_order must be at least 2");
  if (c.branching < 2) throw ValidationError("propagation.branching must be at least 2");
  if (!(c.tolerance > 0.0)) throw ValidationError("propagation.tolerance must be positive");
  if (!(c.ladder_memory_gib > 0.0)) throw ValidationError("propagation.ladder_memory_gib must be positive");

  const json init = doc.value("initial_state", json::object());
  check_keys(init, {"kind", "occupation", "energy_window", "phases"}, "initial_state");
  c.initial_kind = get_or<std::string>(init, "kind", "occupation", "initial_state");
  if (c.initial_kind == "occupation") {
    if (init.contains("occupation")) {
      c.occupation = get_or<std::vector<int>>(init, "occupation", {}, "initial_state");
    } else {
      c.occupation.assign(M, 0);
      c.occupation[0] = N;
    }
    if (c.occupation.size() != M) throw ValidationError("initial_state.occupation must list one value per level");
    long total = 0;
    for (int n : c.occupation) {
      if (n < 0) throw ValidationError("initial_state.occupation has a negative entry");
      total += n;
    }
    if (total != N) throw ValidationError("initial_state.occupation does not sum to model.particles");
  } else if (c.initial_kind == "microcanonical") {
    if (!init.contains("energy_window")) throw ValidationError("initial_state.energy_window is required");
    std::tie(c.window_min, c.window_max) = parse_window_pair(init["energy_window"], "initial_state.energy_window");
    const std::string ph = get_or<std::string>(init, "phases", "positive", "initial_state");
    if (ph == "positive") c.phases = PhaseConvention::Positive;
    else if (ph == "random") c.phases = PhaseConvention::Random;
    else throw ValidationError("initial_state.phases must be positive or random");
  } else {
    throw ValidationError("initial_state.kind must be occupation or microcanonical");
  }

  const json meas = doc.value("measurement", json::object());
  check_keys(meas, {"system_modes", "observables", "times", "correlators"}, "measurement");
  if (meas.contains("system_modes")) {
    for (long level : get_or<std::vector<long>>(meas, "system_modes", {}, "measurement"))
      c.system_modes.push_back(level_index(level, M, "measurement.system_modes"));
    std::set<std::size_t> uniq(c.system_modes.begin(), c.system_modes.end());
    if (uniq.size() != c.system_modes.size() || uniq.empty() || uniq.size() >= M)
      throw ValidationError("measurement.system_modes must be a nonempty proper subset without repeats");
  }
  if (meas.contains("observables")) {
    c.observables = get_or<std::vector<std::string>>(meas, "observables", {}, "measurement");
    for (const auto& o : c.observables)
      if (o != "entropy" && o != "occupations" && o != "energy")
        throw ValidationError("unknown observable '" + o + "' (expected entropy, occupations, energy)");
  }
  if (meas.contains("times")) c.times = parse_times(meas["times"]);
  if (c.times && std::find(c.observables.begin(), c.observables.end(), "entropy") != c.observables.end() &&
      c.system_modes.empty())
    throw ValidationError("the entropy observable needs measurement.system_modes");

  if (meas.contains("correlators")) {
    const json& cj = meas["correlators"];
    const std::string where = "measurement.correlators";
    check_keys(cj, {"com_times", "pairs", "density_pairs", "tau_max", "tau_step", "energy_grid", "window"}, where);
    CorrelatorSpec cs;
    cs.com_times = get_required<std::vector<double>>(cj, "com_times", where);
    if (cs.com_times.empty()) throw ValidationError(where + ".com_times is empty");
    for (double t : cs.com_times)
      if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError(where + ".com_times must be nonnegative");
    if (cj.contains("pairs")) cs.pairs = parse_pairs(cj["pairs"], M, where + ".pairs");
    if (cj.contains("density_pairs")) cs.density_pairs = parse_pairs(cj["density_pairs"], M, where + ".density_pairs");
    if (cs.pairs.empty() && cs.density_pairs.empty()) throw ValidationError(where + " lists no pairs");
    cs.tau_max = get_or<double>(cj, "tau_max", 10.0, where);
    cs.tau_step = get_or<double>(cj, "tau_step", 0.01, where);
    if (!(cs.tau_max > 0.0) || !(cs.tau_step > 0.0) || cs.tau_step > cs.tau_max)
      throw ValidationError(where + " needs 0 < tau_step <= tau_max");
    cs.window = parse_window(get_or<std::string>(cj, "window", "hann", where));
    if (cj.contains("energy_grid")) {
      const json& eg = cj["energy_grid"];
      check_keys(eg, {"kind", "oversample", "min", "max", "step"}, where + ".energy_grid");
      cs.energy_grid = get_or<std::string>(eg, "kind", "nyquist", where + ".energy_grid");
      cs.oversample = get_or<std::size_t>(eg, "oversample", 4, where + ".energy_grid");
      cs.e_min = get_or<double>(eg, "min", -20.0, where + ".energy_grid");
      cs.e_max = get_or<double>(eg, "max", 80.0, where + ".energy_grid");
      cs.e_step = get_or<double>(eg, "step", 0.05, where + ".energy_grid");
      if (cs.energy_grid == "uniform") {
        if (!(cs.e_step > 0.0) || !(cs.e_max > cs.e_min)) throw ValidationError(where + ".energy_grid is invalid");
        const double e_abs = std::max(std::abs(cs.e_min), std::abs(cs.e_max));
        if (e_abs * cs.tau_step > std::acos(-1.0))
          throw AliasingError(where + ".energy_grid exceeds the Nyquist limit pi/tau_step");
      } else if (cs.energy_grid != "nyquist") {
        throw ValidationError(where + ".energy_grid.kind must be nyquist or uniform");
      }
    }
    if (!cs.pairs.empty()) {
      if (N < 1) throw ValidationError("single-particle correlators need at least one particle");
      const std::uint64_t upper = sector_dimension(M, N + 1);
      if (upper > c.dimension_cap)
        throw CapacityError("sector N+1 has dimension " + std::to_string(upper) + ", above dimension_cap");
    }
    c.correlators = cs;
  }

  const json chaos = doc.value("chaos", json::object());
  check_keys(chaos, {"window"}, "chaos");
  if (chaos.contains("window") && !chaos["window"].is_null())
    c.chaos_window = parse_window_pair(chaos["window"], "chaos.window");

  const json fit = doc.value("fit", json::object());
  check_keys(fit, {"peak_count", "beta_window", "tail_fraction", "connected_density", "relaxation"}, "fit");
  c.peak_count = get_or<std::size_t>(fit, "peak_count", 0, "fit");
  if (fit.contains("beta_window")) c.beta_window = parse_window_pair(fit["beta_window"], "fit.beta_window");
  c.tail_fraction = get_or<double>(fit, "tail_fraction", 0.2, "fit");
  if (!(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0)) throw ValidationError("fit.tail_fraction must lie in (0, 1]");
  c.connected_density = get_or<bool>(fit, "connected_density", true, "fit");
  if (fit.contains("relaxation")) {
    c.relaxation = get_or<std::vector<std::string>>(fit, "relaxation", {}, "fit");
    for (const auto& r : c.relaxation)
      if (r != "entropy" && r != "n_sys") throw ValidationError("fit.relaxation entries must be entropy or n_sys");
  }
  if (c.times) {
    auto has = [&](const std::vector<std::string>& v, const char* x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    if (has(c.relaxation, "entropy") && !has(c.observables, "entropy"))
      throw ValidationError("fit.relaxation lists entropy but measurement.observables does not");
    if (has(c.relaxation, "n_sys") && (!has(c.observables, "occupations") || c.system_modes.empty()))
      throw ValidationError("fit.relaxation lists n_sys, which needs the occupations observable and system_modes");
  }

  const json out = doc.value("output", json::object());
  check_keys(out, {"directory"}, "output");
  c.output_directory = get_or<std::string>(out, "directory", "dynbath_out", "output");
  c.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");

  const std::uint64_t dim = sector_dimension(M, N);
  if (dim > c.dimension_cap) {
    std::ostringstream msg;
    msg << "sector dimension " << dim << " exceeds dimension_cap " << c.dimension_cap;
    throw CapacityError(msg.str());
  }
  return c;
}

json RunConfig::resolved() const {
  json j;
  j["model"] = {{"modes", model.num_modes},
                {"particles", model.num_particles},
                {"level_spacing", model.level_spacing},
                {"hopping", model.hopping},
                {"intra_level", model.intra_level},
                {"inter_level", model.inter_level}};
  j["propagation"] = {{"time_step", time_step ? json(*time_step) : json("auto")},
                      {"taylor_order", taylor_order},
                      {"branching", branching},
                      {"depth", depth ? json(*depth) : json("auto")},
                      {"tolerance", tolerance},
                      {"step_norm", step_norm == StepNorm::MaxElement ? "max_element" : "spectral"},
                      {"renormalize", renormalize},
                      {"snap", snap},
                      {"ladder_memory_gib", ladder_memory_gib}};
  json init = {{"kind", initial_kind}};
  if (initial_kind == "occupation") init["occupation"] = occupation;
  else {
    init["energy_window"] = {window_min, window_max};
    init["phases"] = phases == PhaseConvention::Positive ? "positive" : "random";
  }
  j["initial_state"] = init;
  json meas = json::object();
  json levels = json::array();
  for (std::size_t m : system_modes) levels.push_back(m + 1);
  meas["system_modes"] = levels;
  meas["observables"] = observables;
  if (times) {
    json t = {{"kind", times->kind}};
    if (times->kind == "list") t["values"] = times->values;
    else {
      t["start"] = times->start;
      t["stop"] = times->stop;
      t["count"] = times->count;
      if (times->kind == "log") t["include_zero"] = times->include_zero;
    }
    meas["times"] = t;
  }
  if (correlators) {
    auto pairs_json = [](const std::vector<ModePair>& ps) {
      json a = json::array();
      for (const auto& p : ps) a.push_back({p.i + 1, p.j + 1});
      return a;
    };
    json cj = {{"com_times", correlators->com_times},
               {"pairs", pairs_json(correlators->pairs)},
               {"density_pairs", pairs_json(correlators->density_pairs)},
               {"tau_max", correlators->tau_max},
               {"tau_step", correlators->tau_step},
               {"window", window_name(correlators->window)}};
    if (correlators->energy_grid == "nyquist")
      cj["energy_grid"] = {{"kind", "nyquist"}, {"oversample", correlators->oversample}};
    else
      cj["energy_grid"] = {{"kind", "uniform"}, {"min", correlators->e_min}, {"max", correlators->e_max},
                           {"step", correlators->e_step}};
    meas["correlators"] = cj;
  }
  j["measurement"] = meas;
  j["chaos"] = {{"window", chaos_window ? json{chaos_window->first, chaos_window->second} : json(nullptr)}};
  j["fit"] = {{"peak_count", peak_count == 0 ? model.num_modes : peak_count},
              {"beta_window", {beta_window.first, beta_window.second}},
              {"tail_fraction", tail_fraction},
              {"connected_density", connected_density},
              {"relaxation", relaxation}};
  j["output"] = {{"directory", output_directory.string()}};
  j["seed"] = seed;
  j["dimension_cap"] = dimension_cap;
  return j;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(doc);
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::BuildSpectrum: return "build-spectrum";
    case Stage::Evolve: return "evolve";
    case Stage::Greens: return "greens";
    case Stage::Thermometry: return "thermometry";
    case Stage::Chaos: return "chaos";
    case Stage::Fit: return "fit";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::BuildSpectrum, Stage::Evolve, Stage::Greens, Stage::Thermometry, Stage::Chaos, Stage::Fit})
    if (stage_name(s) == name) return s;
  throw ValidationError("unknown stage '" + name + "'");
}

std::vector<Stage> stage_dependencies(Stage stage) {
  switch (stage) {
    case Stage::Thermometry: return {Stage::Greens};
    case Stage::Chaos: return {Stage::BuildSpectrum};
    case Stage::Fit: return {Stage::Evolve};
    default: return {};
  }
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(byte, sizeof byte, "%02x", digest[k]);
    hex += byte;
  }
  return hex;
}

json to_json(const TemperatureFit& fit) {
  return {{"temperature", fit.temperature},
          {"temperature_error", fit.temperature_error},
          {"beta", fit.beta},
          {"beta_error", fit.beta_error},
          {"window", {fit.window.first, fit.window.second}},
          {"residual_norm", fit.residual_norm},
          {"normalized_residuals", fit.normalized_residuals},
          {"point_count", fit.point_count},
          {"converged", fit.converged},
          {"thermal", fit.thermal},
          {"status", fit.status}};
}

json to_json(const PeakSet& peaks) {
  json list = json::array();
  for (const auto& p : peaks.peaks)
    list.push_back({{"center", p.center},
                    {"center_error", p.center_error},
                    {"width", p.width},
                    {"width_error", p.width_error},
                    {"weight", p.weight},
                    {"weight_error", p.weight_error}});
  return {{"peaks", list},
          {"residual_norm", peaks.residual_norm},
          {"converged", peaks.converged},
          {"iterations", peaks.iterations},
          {"status", peaks.status}};
}

json to_json(const RelaxationFit& fit) {
  return {{"a1", fit.a1}, {"a1_error", fit.a1_error}, {"a2", fit.a2}, {"a2_error", fit.a2_error},
          {"tau1", fit.tau1}, {"tau1_error", fit.tau1_error}, {"tau2", fit.tau2}, {"tau2_error", fit.tau2_error},
          {"plateau", fit.plateau}, {"sigma_inf", fit.sigma_inf}, {"residual_norm", fit.residual_norm},
          {"converged", fit.converged}, {"degenerate", fit.degenerate}, {"status", fit.status}};
}

json to_json(const ChaosReport& report) {
  return {{"mean_ratio", report.mean_ratio},
          {"ratio_count", report.ratio_count},
          {"merged_levels", report.merged_levels},
          {"level_count", report.level_count}};
}

CorrelatorSpectrum load_spectrum_csv(const fs::path& path, CorrelatorKind kind, const TauGrid& grid,
                                     WindowKind window, std::size_t num_modes) {
  const CsvTable table = read_csv(path);
  const auto e = table.values("E_over_J");
  const auto re = table.values("re");
  const auto im = table.values("im");
  if (e.size() < 2) throw ValidationError(path.string() + " has fewer than two energies");
  CorrelatorSpectrum s;
  s.kind = kind;
  s.grid = grid;
  s.window = window;
  s.num_modes = num_modes;
  s.energies.start = e.front();
  s.energies.count = e.size();
  s.energies.step = (e.back() - e.front()) / static_cast<double>(e.size() - 1);
  for (std::size_t k = 1; k < e.size(); ++k)
    if (std::abs(e[k] - s.energies.at(k)) > 1e-9 * std::max(1.0, std::abs(e[k])))
      throw ValidationError(path.string() + " is not on a uniform energy grid");
  s.values.resize(1, static_cast<Eigen::Index>(e.size()));
  for (std::size_t k = 0; k < e.size(); ++k) s.values(0, static_cast<Eigen::Index>(k)) = cplx(re[k], im[k]);
  return s;
}

Runner::Runner(RunConfig config) : config_(std::move(config)), out_(config_.output_directory) {
  cache_ = std::make_unique<SectorCache>(config_.model.num_modes, config_.dimension_cap);
  std::error_code ec;
  fs::create_directories(out_, ec);
  if (ec) throw ValidationError("cannot create output directory " + out_.string() + ": " + ec.message());
  load_manifest();
}

fs::path Runner::manifest_path() const { return out_ / "manifest.json"; }

void Runner::load_manifest() {
  manifest_ = json::object();
  if (fs::exists(manifest_path())) {
    std::ifstream in(manifest_path());
    try {
      manifest_ = json::parse(in);
    } catch (const json::exception&) {
      manifest_ = json::object();
    }
    // A manifest from a different configuration is stale.
    if (!manifest_.contains("config") || manifest_["config"] != config_.resolved()) manifest_ = json::object();
  }
  manifest_["schema_version"] = 1;
  manifest_["tool"] = "dynbath";
  manifest_["versions"] = {{"dynbath", library_version()},
                           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  manifest_["config"] = config_.resolved();
  manifest_["csv_schemas"] = {{"eigenvalues.csv", {"index", "E_over_J"}},
                              {"state_spectrum.csv", {"E_over_J", "weight"}},
                              {"entropy.csv", {"Jt", "S", "S_max_bound"}},
                              {"occupations.csv", {"Jt", "n_1..n_M", "n_sys"}},
                              {"drift.csv", {"Jt_requested", "Jt", "norm_error", "energy", "energy_drift"}},
                              {"greens/*/<kind>_<i>_<j>.csv", {"E_over_J", "re", "im"}},
                              {"thermometry/fdt_points_*.csv", {"E_over_J", "n_B", "sigma"}},
                              {"thermometry/timeline_<i>_<j>.csv",
                               {"Jt", "T", "T_error", "beta", "beta_error", "thermal"}}};
  if (!manifest_.contains("stages")) manifest_["stages"] = json::object();
}

void Runner::write_json(const fs::path& rel, const json& doc) {
  const fs::path path = out_ / rel;
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void Runner::write_manifest() {
  json files = json::array();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(out_))
    if (entry.is_regular_file() && entry.path() != manifest_path()) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths)
    files.push_back({{"path", fs::relative(p, out_).generic_string()},
                     {"bytes", fs::file_size(p)},
                     {"sha256", file_sha256(p)}});
  manifest_["files"] = files;
  std::ofstream out(manifest_path());
  if (!out) throw ValidationError("cannot write " + manifest_path().string());
  out << manifest_.dump(2) << '\n';
}

void Runner::record_stage(Stage stage, const std::string& status, double seconds, const std::string& error) {
  json entry = {{"status", status}, {"wall_seconds", seconds}};
  if (!error.empty()) entry["error"] = error;
  manifest_["stages"][stage_name(stage)] = entry;
}

BasisPtr Runner::sector(int particles) { return cache_->get(particles); }

const SectorOperator& Runner::hamiltonian(int particles) {
  auto it = hamiltonians_.find(particles);
  if (it != hamiltonians_.end()) return it->second;
  HamiltonianParams p = config_.model;
  p.num_particles = particles;
  return hamiltonians_.emplace(particles, build_hamiltonian(p, sector(particles))).first->second;
}

const EigenSystem& Runner::eigensystem() {
  if (!eigensystem_) eigensystem_ = diagonalize(hamiltonian(config_.model.num_particles));
  return *eigensystem_;
}

StateVector Runner::initial_state() {
  const int N = config_.model.num_particles;
  if (config_.initial_kind == "occupation") return occupation_state(sector(N), config_.occupation);
  return microcanonical_state(eigensystem(), config_.window_min, config_.window_max, config_.phases, config_.seed);
}

double Runner::evolve_horizon() const {
  if (!config_.times) return 0.0;
  const auto t = config_.times->expand();
  return *std::max_element(t.begin(), t.end());
}

double Runner::greens_horizon() const {
  if (!config_.correlators) return 0.0;
  const auto& c = *config_.correlators;
  return *std::max_element(c.com_times.begin(), c.com_times.end()) + 0.5 * c.tau_max;
}

const Runner::Propagation& Runner::propagation() {
  if (propagation_) return *propagation_;
  Propagation p;
  const int N = config_.model.num_particles;
  std::vector<int> sectors{N};
  if (config_.correlators && !config_.correlators->pairs.empty()) {
    if (N > 0) sectors.push_back(N - 1);
    sectors.push_back(N + 1);
  }
  p.unit = config_.correlators ? 0.5 * config_.correlators->tau_step : 1.0;
  if (config_.time_step) {
    p.time_step = *config_.time_step;
  } else {
    double max_el = 0.0, rho = 0.0;
    for (int n : sectors) {
      const SectorOperator& h = hamiltonian(n);
      max_el = std::max(max_el, step_measure(h, config_.step_norm));
      rho = std::max(rho, gershgorin_bound(h));
    }
    double horizon = std::max(evolve_horizon(), greens_horizon());
    if (config_.correlators) horizon = std::max(horizon, config_.correlators->tau_max);
    const StepChoice choice =
        choose_time_step(max_el, rho, config_.taylor_order, horizon, config_.tolerance, p.unit);
    p.time_step = choice.time_step;
    p.halvings = choice.halvings;
    p.error_estimate = choice.error_estimate;
  }
  propagation_ = p;
  manifest_["propagation"] = {{"time_step", p.time_step},
                              {"time_step_unit", p.unit},
                              {"halvings", p.halvings},
                              {"taylor_order", config_.taylor_order},
                              {"branching", config_.branching},
                              {"series_error_estimate", p.error_estimate},
                              {"ladders", json::object()}};
  return *propagation_;
}

LadderPtr Runner::ladder(int particles, double horizon) {
  auto it = ladders_.find(particles);
  if (it != ladders_.end() && ladder_horizon_[particles] >= horizon) return it->second;
  ladders_.erase(particles);  // release before building a deeper one
  const Propagation& p = propagation();
  const SectorOperator& h = hamiltonian(particles);
  PropagatorConfig cfg;
  cfg.time_step = p.time_step;
  cfg.taylor_order = config_.taylor_order;
  cfg.branching = config_.branching;
  cfg.step_norm = config_.step_norm;
  cfg.renormalize = config_.renormalize;
  if (config_.depth) {
    cfg.depth = *config_.depth;
  } else {
    cfg.depth = choose_depth(p.time_step, config_.branching, std::max(horizon, p.time_step));
    const std::size_t sectors = config_.correlators && !config_.correlators->pairs.empty() ? 3 : 1;
    const double rung_bytes = static_cast<double>(h.dimension()) * static_cast<double>(h.dimension()) * 16.0;
    const double budget = config_.ladder_memory_gib * 1073741824.0 / static_cast<double>(sectors);
    const int max_depth = static_cast<int>(budget / rung_bytes) - 1;
    if (max_depth < 0) throw CapacityError("ladder memory budget is too small for one rung");
    cfg.depth = std::min(cfg.depth, max_depth);
  }
  auto built = std::make_shared<const PropagatorLadder>(build_ladder(h, cfg));
  manifest_["propagation"]["ladders"][std::to_string(particles)] = {
      {"dimension", h.dimension()},
      {"depth", cfg.depth},
      {"top_rung_span", built->rung_span(cfg.depth)},
      {"max_unitarity_defect", built->max_unitarity_defect()}};
  ladders_[particles] = built;
  ladder_horizon_[particles] = config_.depth ? std::numeric_limits<double>::infinity() : horizon;
  return built;
}

bool Runner::stage_applicable(Stage stage) const {
  switch (stage) {
    case Stage::BuildSpectrum: return true;
    case Stage::Chaos:
      return sector_dimension(config_.model.num_modes, config_.model.num_particles) >= 3;
    case Stage::Evolve: return config_.times.has_value();
    case Stage::Greens:
    case Stage::Thermometry: return config_.correlators.has_value();
    case Stage::Fit: return config_.times.has_value() && !config_.relaxation.empty();
  }
  return false;
}

bool Runner::stage_done(Stage stage) const {
  const auto& st = manifest_["stages"];
  return st.contains(stage_name(stage)) && st[stage_name(stage)]["status"] == "ok";
}

void Runner::require_artifact(const fs::path& rel, Stage producer) const {
  if (!fs::exists(out_ / rel))
    throw MissingArtifact("missing " + (out_ / rel).string() + "; run the '" + stage_name(producer) +
                          "' stage first");
}

void Runner::run_stage(Stage stage, bool with_dependencies) {
  if (with_dependencies)
    for (Stage dep : stage_dependencies(stage))
      if (!stage_done(dep)) run_stage(dep, true);
  if (!stage_applicable(stage))
    throw ValidationError("the configuration has nothing for the '" + stage_name(stage) + "' stage");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    switch (stage) {
      case Stage::BuildSpectrum: stage_build_spectrum(); break;
      case Stage::Evolve: stage_evolve(); break;
      case Stage::Greens: stage_greens(); break;
      case Stage::Thermometry: stage_thermometry(); break;
      case Stage::Chaos: stage_chaos(); break;
      case Stage::Fit: stage_fit(); break;
    }
  } catch (const std::exception& e) {
    record_stage(stage, "failed", elapsed(), e.what());
    write_manifest();
    throw;
  }
  record_stage(stage, "ok", elapsed(), "");
  write_manifest();
}

json Runner::run_all() {
  for (Stage s : {Stage::BuildSpectrum, Stage::Chaos, Stage::Evolve, Stage::Fit, Stage::Greens, Stage::Thermometry})
    if (stage_applicable(s)) run_stage(s, false);
  return manifest_;
}

void Runner::stage_build_spectrum() {
  const EigenSystem& eig = eigensystem();
  write_eigenvalues_csv(out_ / "eigenvalues.csv", eig.energies);
  const StateVector psi = initial_state();
  const StateSpectrum spec = state_spectrum(eig, psi);
  write_spectrum_csv(out_ / "state_spectrum.csv", spec);
  json summary = {{"dimension", eig.energies.size()},
                  {"E_min", eig.energies.size() ? eig.energies[0] : 0.0},
                  {"E_max", eig.energies.size() ? eig.energies[eig.energies.size() - 1] : 0.0},
                  {"mean_energy", spec.mean_energy},
                  {"width", spec.width},
                  {"total_weight", spec.total_weight},
                  {"entries", spec.entries.size()}};
  if (config_.initial_kind == "microcanonical")
    summary["window_count"] = window_indices(eig, config_.window_min, config_.window_max).size();
  write_json("state_spectrum.json", summary);
}

void Runner::stage_chaos() {
  require_artifact("eigenvalues.csv", Stage::BuildSpectrum);
  const auto e = read_csv(out_ / "eigenvalues.csv").values("E_over_J");
  const ChaosReport report = r_ratio(e, config_.chaos_window);
  json doc = to_json(report);
  doc["window"] = config_.chaos_window ? json{config_.chaos_window->first, config_.chaos_window->second}
                                       : json("full spectrum");
  doc["goe_reference"] = 0.5307;
  doc["poisson_reference"] = 0.386;
  write_json("chaos.json", doc);
}

void Runner::stage_evolve() {
  const int N = config_.model.num_particles;
  const std::size_t M = config_.model.num_modes;
  const auto requested = config_.times->expand();
  const Propagation& p = propagation();
  LadderPtr lad = ladder(N, evolve_horizon());
  const SectorOperator& h = hamiltonian(N);
  const StateVector psi0 = initial_state();

  struct Sample {
    double requested, actual;
    std::int64_t steps;
  };
  std::vector<Sample> samples;
  for (double t : requested) {
    const SnappedTime s = snap_time(t, p.time_step, config_.snap);
    samples.push_back({t, s.actual, s.steps});
  }
  std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.steps < b.steps; });

  const bool want_entropy =
      std::find(config_.observables.begin(), config_.observables.end(), "entropy") != config_.observables.end();
  const bool want_occ =
      std::find(config_.observables.begin(), config_.observables.end(), "occupations") != config_.observables.end();
  std::optional<PartitionMap> pm;
  if (!config_.system_modes.empty()) pm.emplace(sector(N), config_.system_modes);

  std::vector<std::string> occ_header{"Jt"};
  for (std::size_t i = 0; i < M; ++i) occ_header.push_back("n_" + std::to_string(i + 1));
  if (pm) occ_header.push_back("n_sys");
  std::optional<CsvWriter> entropy_csv, occ_csv;
  if (want_entropy) entropy_csv.emplace(out_ / "entropy.csv", std::vector<std::string>{"Jt", "S", "S_max_bound"});
  if (want_occ) occ_csv.emplace(out_ / "occupations.csv", occ_header);
  CsvWriter drift_csv(out_ / "drift.csv", {"Jt_requested", "Jt", "norm_error", "energy", "energy_drift"});

  std::vector<Eigen::VectorXd> occupations;
  for (std::size_t i = 0; i < M; ++i) occupations.push_back(mode_occupations(*sector(N), i));
  const double bound = pm ? entropy_bound(*pm) : 0.0;
  const cplx e0c = psi0.amplitudes().dot(h.matrix * psi0.amplitudes());
  const double e0 = e0c.real();

  StateVector psi = psi0;
  std::int64_t at = 0;
  double worst_norm = 0.0, worst_energy = 0.0;
  json snapped = json::array();
  for (const auto& s : samples) {
    psi = evolve_steps(psi, s.steps - at, *lad);
    at = s.steps;
    const double norm_error = std::abs(psi.norm() - 1.0);
    const double energy = psi.amplitudes().dot(h.matrix * psi.amplitudes()).real();
    const double drift = std::abs(energy - e0) / std::max(std::abs(e0), 1e-300);
    worst_norm = std::max(worst_norm, norm_error);
    worst_energy = std::max(worst_energy, drift);
    drift_csv.row({s.requested, s.actual, norm_error, energy, drift});
    snapped.push_back({s.requested, s.actual});
    if (want_entropy) {
      const ReducedDensityMatrix rho = reduced_density(psi, *pm);
      entropy_csv->row({s.actual, entanglement_entropy(rho), bound});
    }
    if (want_occ) {
      std::vector<double> row{s.actual};
      const Eigen::VectorXd prob = psi.amplitudes().cwiseAbs2();
      double nsys = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        row.push_back(occupations[i].dot(prob));
        if (pm && std::find(config_.system_modes.begin(), config_.system_modes.end(), i) != config_.system_modes.end())
          nsys += row.back();
      }
      if (pm) row.push_back(nsys);
      occ_csv->row(row);
    }
  }
  manifest_["snapped_times"] = snapped;
  manifest_["drift"] = {{"norm_max", worst_norm}, {"energy_relative_max", worst_energy}, {"initial_energy", e0}};
}

namespace {

std::string time_label(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t_%.10g", t);
  return buf;
}

std::string pair_label(const ModePair& p) { return std::to_string(p.i + 1) + "_" + std::to_string(p.j + 1); }

EnergyGrid config_energy_grid(const CorrelatorSpec& c, const TauGrid& grid) {
  if (c.energy_grid == "uniform") return uniform_energy_grid(c.e_min, c.e_max, c.e_step);
  return nyquist_grid(grid, c.oversample);
}

}  // namespace

void Runner::stage_greens() {
  const CorrelatorSpec& c = *config_.correlators;
  const int N = config_.model.num_particles;
  const std::size_t M = config_.model.num_modes;
  const Propagation& p = propagation();
  const TauGrid grid = make_tau_grid(c.tau_max, c.tau_step, p.time_step);
  const EnergyGrid energies = config_energy_grid(c, grid);
  const StateVector psi0 = initial_state();
  SectorLadders ladders;
  ladders.center = ladder(N, greens_horizon());
  if (!c.pairs.empty()) {
    if (N > 0) ladders.lower = ladder(N - 1, c.tau_max);
    ladders.upper = ladder(N + 1, c.tau_max);
  }

  json index = {{"tau_step", grid.step},
                {"tau_step_requested", c.tau_step},
                {"tau_max", grid.max()},
                {"tau_max_requested", c.tau_max},
                {"window", window_name(c.window)},
                {"energy_grid", {{"start", energies.start}, {"step", energies.step}, {"count", energies.count}}},
                {"times", json::array()}};
  for (double t : c.com_times) {
    const SnappedTime st = snap_time(t, p.time_step, config_.snap);
    const fs::path dir = fs::path("greens") / time_label(st.actual);
    fs::create_directories(out_ / dir);
    json entry = {{"requested", t}, {"actual", st.actual}, {"directory", dir.generic_string()}};

    if (!c.pairs.empty()) {
      const GreenFunctions g = single_particle_correlators(psi0, ladders, c.pairs, st.actual, grid, false);
      const KeldyshSpectral ks = keldysh_and_spectral(g.lesser, g.greater);
      const std::int64_t K = grid.half_count;
      json identities = json::array();
      for (std::size_t r = 0; r < c.pairs.size(); ++r) {
        if (c.pairs[r].i != c.pairs[r].j) continue;
        const auto row = static_cast<Eigen::Index>(r);
        const double n = (cplx(0.0, 1.0) * g.lesser.values(row, K)).real();
        identities.push_back({{"level", c.pairs[r].i + 1},
                              {"A_tau0", ks.spectral.values(row, K).real()},
                              {"iGK_tau0", (cplx(0.0, 1.0) * ks.keldysh.values(row, K)).real()},
                              {"n", n}});
      }
      entry["equal_time"] = identities;
      entry["norm_drift"] = g.lesser.norm_drift;
      std::vector<std::pair<const TwoTimeSeries*, CorrelatorKind>> all{
          {&g.lesser, CorrelatorKind::Lesser},
          {&g.greater, CorrelatorKind::Greater},
          {&ks.keldysh, CorrelatorKind::Keldysh},
          {&ks.spectral, CorrelatorKind::Spectral}};
      for (const auto& [series, kind] : all) {
        const CorrelatorSpectrum spec = to_energy(*series, energies, c.window);
        for (std::size_t r = 0; r < c.pairs.size(); ++r)
          write_spectrum_csv(out_ / dir / (kind_name(kind) + "_" + pair_label(c.pairs[r]) + ".csv"), spec, r);
        bool all_diag = true;
        for (std::size_t i = 0; i < M; ++i)
          all_diag = all_diag && std::find(c.pairs.begin(), c.pairs.end(), ModePair{i, i}) != c.pairs.end();
        if (all_diag && (kind == CorrelatorKind::Spectral || kind == CorrelatorKind::Keldysh)) {
          const CorrelatorSpectrum tr = trace_levels(spec);
          write_spectrum_csv(out_ / dir / (kind_name(kind) + "_traced.csv"), tr, 0);
          if (kind == CorrelatorKind::Spectral) {
            const RealityDiagnostics rd = reality_diagnostics(tr, 0);
            entry["spectral_traced"] = {{"sum_rule", spectral_integral(tr, 0).real()},
                                        {"imag_to_real", rd.imag_to_real},
                                        {"negative_fraction", rd.negative_fraction}};
          }
        }
      }
    }
    if (!c.density_pairs.empty()) {
      const DensityCorrelators d = density_correlators(psi0, *ladders.center, c.density_pairs, st.actual, grid, false);
      entry["density_norm_drift"] = d.forward.norm_drift;
      for (const TwoTimeSeries* series : {&d.forward, &d.reversed, &d.disconnected}) {
        const CorrelatorSpectrum spec = to_energy(*series, energies, c.window);
        for (std::size_t r = 0; r < c.density_pairs.size(); ++r)
          write_spectrum_csv(out_ / dir / (kind_name(series->kind) + "_" + pair_label(c.density_pairs[r]) + ".csv"),
                             spec, r);
      }
    }
    index["times"].push_back(entry);
  }
  write_json("greens/index.json", index);
}

void Runner::stage_thermometry() {
  require_artifact("greens/index.json", Stage::Greens);
  json index;
  {
    std::ifstream in(out_ / "greens" / "index.json");
    index = json::parse(in);
  }
  const CorrelatorSpec& c = *config_.correlators;
  const std::size_t M = config_.model.num_modes;
  TauGrid grid;
  grid.step = index["tau_step"].get<double>();
  grid.half_count = std::llround(index["tau_max"].get<double>() / grid.step);
  const WindowKind window = parse_window(index["window"].get<std::string>());
  const std::size_t peaks = config_.peak_count == 0 ? M : config_.peak_count;

  json report = {{"beta_window", {config_.beta_window.first, config_.beta_window.second}},
                 {"connected_density", config_.connected_density},
                 {"times", json::array()}};
  std::map<std::string, std::vector<std::pair<double, std::optional<TemperatureFit>>>> timelines;
  std::map<std::string, std::vector<std::string>> gaps;
  fs::create_directories(out_ / "thermometry");

  for (const auto& entry : index["times"]) {
    const double t = entry["actual"].get<double>();
    const fs::path dir = out_ / entry["directory"].get<std::string>();
    json tj = {{"com_time", t}};
    if (fs::exists(dir / "spectral_traced.csv") && fs::exists(dir / "keldysh_traced.csv")) {
      json sp;
      try {
        const CorrelatorSpectrum a = load_spectrum_csv(dir / "spectral_traced.csv", CorrelatorKind::Spectral, grid, window, M);
        CorrelatorSpectrum k = load_spectrum_csv(dir / "keldysh_traced.csv", CorrelatorKind::Keldysh, grid, window, M);
        k.values *= cplx(0.0, 1.0);  // fit the real function i G^K
        LorentzianOptions opts;
        opts.level_spacing = config_.model.level_spacing;
        opts.seed = config_.seed;
        const PeakSet pa = fit_lorentzians(a, 0, peaks, opts);
        LorentzianOptions kopts = opts;
        for (const auto& pk : pa.peaks) kopts.seed_centers.push_back(pk.center);
        kopts.center_freedom = 0.25 * std::abs(config_.model.level_spacing);
        const PeakSet pk = fit_lorentzians(k, 0, peaks, kopts);
        const auto points = fdt_points_from_peaks(pa, pk);
        write_fdt_points_csv(out_ / "thermometry" / ("fdt_points_" + time_label(t) + ".csv"), points);
        sp["spectral_peaks"] = to_json(pa);
        sp["keldysh_peaks"] = to_json(pk);
        json pts = json::array();
        for (const auto& q : points)
          pts.push_back({{"energy", q.energy}, {"n_B", q.occupation}, {"sigma", q.sigma}, {"unphysical", q.unphysical}});
        sp["points"] = pts;
        sp["bose_einstein"] = to_json(fit_bose_einstein(points, config_.seed));
      } catch (const std::runtime_error& e) {
        sp["error"] = e.what();
      }
      tj["single_particle"] = sp;
    }
    json dens = json::array();
    for (const auto& pair : c.density_pairs) {
      const std::string label = pair_label(pair);
      const fs::path fwd = dir / ("density_forward_" + label + ".csv");
      const fs::path rev = dir / ("density_reversed_" + label + ".csv");
      const fs::path dis = dir / ("density_disconnected_" + label + ".csv");
      if (!fs::exists(fwd) || !fs::exists(rev)) {
        timelines[label].push_back({t, std::nullopt});
        gaps[label].push_back("missing spectra");
        continue;
      }
      CorrelatorSpectrum f = load_spectrum_csv(fwd, CorrelatorKind::DensityForward, grid, window, M);
      CorrelatorSpectrum r = load_spectrum_csv(rev, CorrelatorKind::DensityReversed, grid, window, M);
      if (config_.connected_density && fs::exists(dis)) {
        const CorrelatorSpectrum d = load_spectrum_csv(dis, CorrelatorKind::DensityDisconnected, grid, window, M);
        f.values -= d.values;
        r.values -= d.values;
      }
      TimelineInput in{t, &f, &r, 0};
      const auto tl = temperature_timeline(std::span<const TimelineInput>(&in, 1), config_.beta_window);
      json dj = {{"pair", {pair.i + 1, pair.j + 1}}};
      if (tl[0].fit) dj["fit"] = to_json(*tl[0].fit);
      else dj["gap"] = tl[0].gap_reason;
      timelines[label].push_back({t, tl[0].fit});
      gaps[label].push_back(tl[0].gap_reason);
      dens.push_back(dj);
    }
    tj["density"] = dens;
    report["times"].push_back(tj);
  }
  for (const auto& [label, series] : timelines) {
    CsvWriter csv(out_ / "thermometry" / ("timeline_" + label + ".csv"),
                  {"Jt", "T", "T_error", "beta", "beta_error", "thermal"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [t, fit] : series) {
      if (fit) csv.row({t, fit->temperature, fit->temperature_error, fit->beta, fit->beta_error, fit->thermal ? 1.0 : 0.0});
      else csv.row({t, nan, nan, nan, nan, 0.0});
    }
  }
  write_json("thermometry.json", report);
}

void Runner::stage_fit() {
  json report = json::object();
  for (const auto& which : config_.relaxation) {
    const std::string file = which == "entropy" ? "entropy.csv" : "occupations.csv";
    const std::string column = which == "entropy" ? "S" : "n_sys";
    require_artifact(file, Stage::Evolve);
    const CsvTable table = read_csv(out_ / file);
    if (std::find(table.header.begin(), table.header.end(), column) == table.header.end()) {
      report[which] = {{"error", file + " has no column " + column}};
      continue;
    }
    const auto t = table.values("Jt");
    const auto y = table.values(column);
    json entry;
    try {
      const PlateauStats ps = plateau_stats(y, config_.tail_fraction);
      entry["plateau"] = {{"mean", ps.mean}, {"std", ps.std}, {"count", ps.count}, {"tail_fraction", config_.tail_fraction}};
      entry["biexponential"] = to_json(fit_biexponential(t, y, ps.mean, ps.std, config_.seed));
    } catch (const std::runtime_error& e) {
      entry["error"] = e.what();
    }
    report[which] = entry;
  }
  write_json("relaxation.json", report);
}

}  // namespace dynbath
