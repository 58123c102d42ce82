#include "bohmsim/cli.hpp"

#include "bohmsim/config_io.hpp"
#include "bohmsim/ensemble.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#ifndef BOHMSIM_VERSION
#define BOHMSIM_VERSION "unknown"
#endif

namespace bohmsim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version() { return BOHMSIM_VERSION; }

namespace {

constexpr double kOracleTolerance = 1e-6;
constexpr std::size_t kOraclePoints = 16;
constexpr double kAbortAlertFraction = 1e-3;

std::string num(double v)
{
  if (!std::isfinite(v))
    throw NumericError("refusing to write a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const fs::path& path, const std::string& units, const std::string& header)
      : path_(path), os_(path, std::ios::binary)
  {
    if (!os_)
      throw IoError("cannot open " + path.string() + " for writing");
    os_ << "# " << units << '\n' << header << '\n';
  }
  template <class... Cols>
  void row(const Cols&... cols)
  {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cols), first = false), ...);
    os_ << '\n';
  }
  void close()
  {
    os_.close();
    if (!os_)
      throw IoError("failed writing " + path_.string());
  }

private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& s) { return s; }

  fs::path path_;
  std::ofstream os_;
};

void write_json(const fs::path& path, const json& j)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  os.close();
  if (!os)
    throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Numeric rows of a CSV written by CsvWriter (comment and header skipped).
std::vector<std::vector<double>> read_csv(const fs::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json peaks_json(const std::vector<Peak>& peaks)
{
  json a = json::array();
  for (const Peak& p : peaks)
    a.push_back({{"position_m", p.position}, {"height_per_m", p.height}, {"fwhm_m", p.fwhm}});
  return a;
}

std::vector<Peak> peaks_from_json(const json& a)
{
  std::vector<Peak> out;
  for (const json& p : a)
    out.push_back({p.at("position_m").get<double>(), p.at("height_per_m").get<double>(),
                   p.at("fwhm_m").get<double>()});
  return out;
}

json peak_diff(const std::vector<Peak>& a, const std::vector<Peak>& b)
{
  json pairs = json::array();
  std::size_t unmatched = 0;
  for (const Peak& p : a) {
    if (b.empty()) {
      ++unmatched;
      continue;
    }
    const Peak* best = &b.front();
    for (const Peak& q : b)
      if (std::abs(q.position - p.position) < std::abs(best->position - p.position))
        best = &q;
    pairs.push_back({{"position_a_m", p.position},
                     {"position_b_m", best->position},
                     {"shift_m", best->position - p.position}});
  }
  return {{"count_a", a.size()},
          {"count_b", b.size()},
          {"count_difference", static_cast<long>(a.size()) - static_cast<long>(b.size())},
          {"nearest_pairs", pairs},
          {"unmatched_a", unmatched}};
}

double effective_smear(const ExperimentConfig& c)
{
  if (c.smear.rel_spread > 0)
    return c.smear.rel_spread;
  return c.beam.v_y_spread / c.beam.v_y;
}

// Closed form against direct quadrature at a few points of the global grid.
double oracle_check(const WaveField& field, const WaveGrid& grid, double t)
{
  double num2 = 0, den2 = 0;
  const std::size_t stride = std::max<std::size_t>(1, grid.x.size() / kOraclePoints);
  for (std::size_t i = stride / 2; i < grid.x.size(); i += stride) {
    const Complex ref = psi_after_quadrature(grid.x[i], t, field.context());
    num2 += std::norm(grid.psi[i] - ref);
    den2 += std::norm(ref);
  }
  return den2 > 0 ? std::sqrt(num2 / den2) : 0.0;
}

struct SimulateOptions {
  std::string config_path;
  std::string scenario;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::string threads;
  std::optional<double> smear_vy;
  std::string windows = "global,zoom";
};

json load_config_doc(const std::string& path)
{
  if (path.empty())
    return config_to_json(ExperimentConfig{});
  return read_json(path);
}

// Applies command-line overrides on top of a config document.
ExperimentConfig resolve_config(json doc, const SimulateOptions& o)
{
  if (doc.contains("config") && doc.at("config").is_object())
    doc = doc.at("config");
  if (!o.scenario.empty())
    doc["scenario"] = to_string(scenario_kind_from_string(o.scenario));
  if (o.seed) {
    set_config_path(doc, "sampling.seed", *o.seed);
  } else if (const char* env = std::getenv("BOHMSIM_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used != std::string(env).size())
        throw std::invalid_argument("trailing characters");
      set_config_path(doc, "sampling.seed", s);
    } catch (const std::exception&) {
      throw ConfigError("BOHMSIM_SEED must be an unsigned integer, got '" + std::string(env) + "'");
    }
  }
  if (o.trajectories)
    set_config_path(doc, "sampling.trajectories", *o.trajectories);
  if (!o.threads.empty()) {
    int threads = 0;
    if (o.threads != "auto") {
      try {
        std::size_t used = 0;
        threads = std::stoi(o.threads, &used);
        if (used != o.threads.size() || threads < 1)
          throw std::invalid_argument("bad");
      } catch (const std::exception&) {
        throw ConfigError("--threads takes a positive integer or 'auto'");
      }
    }
    set_config_path(doc, "sampling.threads", threads);
  }
  if (o.smear_vy)
    set_config_path(doc, "smear.rel_spread", *o.smear_vy);
  return config_from_json(doc);
}

std::pair<bool, bool> parse_windows(const std::string& s)
{
  bool global = false, zoom = false;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "global")
      global = true;
    else if (item == "zoom")
      zoom = true;
    else
      throw ConfigError("--windows takes a list of 'global' and 'zoom', got '" + item + "'");
  }
  if (!global && !zoom)
    throw ConfigError("--windows selects no window");
  return {global, zoom};
}

void write_wavefield(const fs::path& path, const WaveGrid& g)
{
  CsvWriter w(path, "x [m], re psi [m^-1/2], im psi [m^-1/2], rho [m^-1] at the screen time",
              "x,re,im,rho");
  for (std::size_t i = 0; i < g.x.size(); ++i)
    w.row(g.x[i], g.psi[i].real(), g.psi[i].imag(), std::norm(g.psi[i]));
  w.close();
}

void write_histogram(const fs::path& path, const std::optional<DensityHistogram>& h)
{
  CsvWriter w(path, "bin_center [m], density [m^-1] (probability normalization over the range)",
              "bin_center,density");
  if (h)
    for (std::size_t i = 0; i < h->bins(); ++i)
      w.row(h->center(i), h->density[i]);
  w.close();
}

json histogram_json(const std::optional<DensityHistogram>& h)
{
  if (!h)
    return nullptr;
  return {{"lo_m", h->lo},
          {"hi_m", h->hi},
          {"bins", h->bins()},
          {"normalization", to_string(h->normalization)},
          {"n_effective", h->n_effective},
          {"total_weight", h->total_weight},
          {"out_of_range_weight", h->out_of_range_weight}};
}

json decisions_json(const ExperimentConfig& c)
{
  const AnalysisConfig& a = c.analysis;
  return {
      {"layout", "slit A centered at x = 0, grating B on the positive-x side; positive asymmetry "
                 "means more mass on the B side"},
      {"guidance_factor", "v = (hbar/m) Im(psi'/psi), factor 1"},
      {"near_field", to_string(c.integrator.near_field)},
      {"sampling", to_string(c.sampling.mode)},
      {"transmission", to_string(c.transmission)},
      {"histogram_normalization", "probability over the global window"},
      {"thresholds",
       {{"global_threshold", a.global_threshold},
        {"global_separation_m", a.global_separation},
        {"zoom_threshold", a.zoom_threshold},
        {"zoom_separation_m", a.zoom_separation},
        {"lateral_window_m", a.lateral_window},
        {"rho_floor", c.integrator.rho_floor},
        {"abort_alert_fraction", kAbortAlertFraction}}}};
}

int simulate_into(const ExperimentConfig& cfg, const fs::path& out_dir, bool want_global,
                  bool want_zoom, std::ostream& out)
{
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const ScenarioSpec spec = build_scenario(cfg.scenario, cfg);
  out << "scenario " << to_string(spec.kind) << ", " << cfg.sampling.trajectories
      << " trajectories, seed " << cfg.sampling.seed << '\n';
  const ScenarioResult r = run_scenario(spec);

  json metrics;
  std::optional<double> oracle;
  if (!spec.predicts_null_density) {
    oracle = oracle_check(spec.field(), r.global, cfg.t2());
    metrics["oracle_check"] = {{"points", kOraclePoints},
                               {"relative_l2", *oracle},
                               {"tolerance", kOracleTolerance}};
  }
  metrics["peaks_global"] = peaks_json(r.density_peaks_global);
  metrics["peaks_zoom"] = peaks_json(r.density_peaks_zoom);
  metrics["histogram_peaks"] = peaks_json(r.histogram_peaks);
  metrics["predicted_peaks"] = peaks_json(r.predicted_peaks);
  metrics["predicted_peak_count"] = r.predicted_peaks.size();
  metrics["asymmetry"] = r.asymmetry;
  metrics["lateral_fraction"] = r.lateral_fraction;
  if (r.histogram_vs_density)
    metrics["histogram_vs_density"] = {{"tv_distance", r.histogram_vs_density->tv_distance},
                                       {"chi2_per_dof", r.histogram_vs_density->chi2_per_dof},
                                       {"n_bins", r.histogram_vs_density->n_bins},
                                       {"notes", r.histogram_vs_density->notes}};

  std::vector<std::string> files;
  if (want_global) {
    write_wavefield(out_dir / "wavefield_global.csv", r.global);
    files.push_back("wavefield_global.csv");
  }
  if (want_zoom) {
    write_wavefield(out_dir / "wavefield_zoom.csv", r.zoom);
    files.push_back("wavefield_zoom.csv");
  }
  {
    CsvWriter w(out_dir / "trajectories.csv", "id [-], t [s], x [m], fate [-]", "id,t,x,fate");
    const std::size_t n = std::min(cfg.sampling.export_trajectories, r.trajectories.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Trajectory& tr = r.trajectories[i];
      for (const TrajectoryState& s : tr.samples)
        w.row(tr.id, s.t, s.x, to_string(tr.fate));
    }
    w.close();
    files.push_back("trajectories.csv");
  }
  write_histogram(out_dir / "histogram.csv", r.hist);
  files.push_back("histogram.csv");

  const double smear = effective_smear(cfg);
  if (smear > 0 && !spec.predicts_null_density) {
    const int k = cfg.smear.nodes;
    const std::size_t per_node =
        (cfg.sampling.trajectories + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
    EnsembleOptions opt;
    opt.threads = cfg.sampling.threads;
    opt.preslit_points = cfg.sampling.preslit_points;
    const SmearResult s = smear_velocity(spec, k, smear, cfg.sampling.seed, per_node, opt);
    CsvWriter w(out_dir / "smeared_density.csv",
                "x [m], rho [m^-1] averaged over the v_y distribution", "x,rho");
    for (std::size_t i = 0; i < s.density.size(); ++i)
      w.row(s.density.x[i], s.density.rho[i]);
    w.close();
    files.push_back("smeared_density.csv");
    write_histogram(out_dir / "smeared_histogram.csv", s.hist);
    files.push_back("smeared_histogram.csv");
    metrics["smear"] = {
        {"rel_spread", smear},
        {"nodes", k},
        {"trajectories_per_node", per_node},
        {"mean_transmitted_fraction", s.mean_transmitted_fraction},
        {"peaks_global", peaks_json(detect_peaks(s.density, cfg.analysis.global_threshold,
                                                 cfg.analysis.global_separation))}};
  }

  json fates = json::object();
  std::size_t aborted = 0;
  for (Fate f : {Fate::TransmittedA, Fate::TransmittedB, Fate::BlockedPlate, Fate::BlockedBySize,
                 Fate::AbortedSingularity}) {
    const auto it = r.fates.find(f);
    const std::size_t count = it == r.fates.end() ? 0 : it->second;
    fates[to_string(f)] = count;
    if (f == Fate::AbortedSingularity)
      aborted = count;
  }
  const double abort_fraction =
      r.trajectories.empty() ? 0.0
                             : static_cast<double>(aborted) / static_cast<double>(r.trajectories.size());

  json manifest;
  manifest["manifest_version"] = 1;
  manifest["code_version"] = version();
  manifest["config"] = config_to_json(cfg);
  manifest["seed"] = cfg.sampling.seed;
  manifest["scenario"] = to_string(spec.kind);
  manifest["predicts_null_density"] = spec.predicts_null_density;
  manifest["fates"] = fates;
  manifest["aborted_fraction"] = abort_fraction;
  manifest["abort_alert"] = abort_fraction > kAbortAlertFraction;
  manifest["transmitted_fraction"] = r.transmitted_fraction;
  manifest["metrics"] = metrics;
  manifest["histogram"] = histogram_json(r.hist);
  manifest["timing_s"] = {
      {"density", r.seconds_density},
      {"ensemble", r.seconds_ensemble},
      {"total", std::chrono::duration<double>(clock::now() - start).count()}};
  manifest["files"] = files;
  manifest["decisions"] = decisions_json(cfg);
  write_json(out_dir / "manifest.json", manifest);

  out << "wrote " << files.size() + 1 << " files to " << out_dir.string() << '\n';
  if (spec.predicts_null_density)
    out << "note: no aperture transmits this species; the scenario predicts a null density\n";
  if (abort_fraction > kAbortAlertFraction)
    out << "warning: " << aborted << " trajectories aborted near nodes\n";
  if (oracle && !(*oracle <= kOracleTolerance)) {
    std::ostringstream msg;
    msg << "closed form disagrees with quadrature: relative L2 " << *oracle;
    throw NumericError(msg.str());
  }
  return Ok;
}

DensityHistogram histogram_from_run(const fs::path& dir)
{
  const auto rows = read_csv(dir / "histogram.csv");
  if (rows.size() < 2)
    throw ConfigError(dir.string() + " has no histogram (fewer than two bins)");
  const json manifest = read_json(dir / "manifest.json");
  const double width = rows[1].at(0) - rows[0].at(0);
  DensityHistogram h;
  h.lo = rows.front().at(0) - 0.5 * width;
  h.hi = rows.back().at(0) + 0.5 * width;
  for (std::size_t i = 0; i <= rows.size(); ++i)
    h.edges.push_back(h.lo + (h.hi - h.lo) * static_cast<double>(i) / static_cast<double>(rows.size()));
  for (const auto& row : rows) {
    if (row.size() != 2)
      throw ConfigError("histogram.csv rows need two columns");
    h.density.push_back(row[1]);
    h.counts.push_back(row[1] * width);
  }
  if (manifest.contains("histogram") && manifest.at("histogram").is_object())
    h.n_effective = manifest.at("histogram").at("n_effective").get<double>();
  h.total_weight = 1.0;
  return h;
}

DensityGrid density_from_run(const fs::path& dir)
{
  const auto rows = read_csv(dir / "wavefield_global.csv");
  DensityGrid g;
  for (const auto& row : rows) {
    if (row.size() != 4)
      throw ConfigError("wavefield rows need four columns");
    g.x.push_back(row[0]);
    g.rho.push_back(row[3]);
  }
  return g;
}

int compare_runs(const fs::path& run_dir, const fs::path& against_dir, const fs::path& out_dir,
                 std::ostream& out)
{
  const DensityHistogram hist = histogram_from_run(run_dir);
  const DensityGrid density = density_from_run(against_dir);
  const ComparisonReport rep = compare_histogram_to_density(hist, density);
  const json run_manifest = read_json(run_dir / "manifest.json");
  const json against_manifest = read_json(against_dir / "manifest.json");
  std::vector<Peak> a = peaks_from_json(run_manifest.at("metrics").at("histogram_peaks"));
  std::vector<Peak> b = peaks_from_json(against_manifest.at("metrics").at("peaks_global"));

  json report = {{"run", run_dir.string()},
                 {"against", against_dir.string()},
                 {"tv_distance", rep.tv_distance},
                 {"chi2_per_dof", rep.chi2_per_dof},
                 {"n_bins", rep.n_bins},
                 {"notes", rep.notes},
                 {"peaks", peak_diff(a, b)}};
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_json(out_dir / "compare.json", report);
  out << "TV " << rep.tv_distance << ", chi2/dof " << rep.chi2_per_dof << " -> "
      << (out_dir / "compare.json").string() << '\n';
  return Ok;
}

std::string sanitize(const std::string& s)
{
  std::string r;
  for (char c : s)
    r += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' ||
          c == '=' || c == '+')
             ? c
             : '_';
  return r;
}

void add_simulate_flags(CLI::App* sub, SimulateOptions& o)
{
  sub->add_option("--config", o.config_path, "JSON config (a manifest.json is accepted)");
  sub->add_option("--scenario", o.scenario, "sa1 | sa2 | bb | diffraction");
  sub->add_option("--seed", o.seed, "RNG seed (overrides BOHMSIM_SEED and the config)");
  sub->add_option("--trajectories", o.trajectories, "number of trajectories");
  sub->add_option("--threads", o.threads, "worker threads, N or auto");
  sub->add_option("--smear-vy", o.smear_vy, "relative v_y spread for velocity smearing");
  sub->add_option("--windows", o.windows, "wavefield windows to write: global,zoom");
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Wavefunction and trajectory simulator for asymmetric slit systems", "bohmsim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "run one scenario and write its artifacts");
  add_simulate_flags(simulate, sim);
  simulate->add_option("--out", sim.out_dir, "output directory")->required();

  std::string run_dir, against_dir, compare_out;
  CLI::App* compare = app.add_subcommand(
      "compare", "histogram of one run against the |psi|^2 density of the same or another run");
  compare->add_option("--run", run_dir, "run directory supplying the histogram")->required();
  compare->add_option("--against", against_dir, "run directory supplying the density");
  compare->add_option("--out", compare_out, "where to write compare.json (default: --run)");

  SimulateOptions sweep_opt;
  std::string param;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand("sweep", "repeat simulate over a list of parameter values");
  add_simulate_flags(sweep, sweep_opt);
  sweep->add_option("--out", sweep_opt.out_dir, "parent output directory")->required();
  sweep->add_option("--param", param, "dotted config path, e.g. beam.v_y")->required();
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');

  std::vector<const char*> argv;
  for (const std::string& a : args)
    argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Ok : ConfigFailure;
  }

  if (simulate->parsed()) {
    const ExperimentConfig cfg = resolve_config(load_config_doc(sim.config_path), sim);
    const auto [g, z] = parse_windows(sim.windows);
    return simulate_into(cfg, sim.out_dir, g, z, out);
  }
  if (compare->parsed()) {
    const fs::path against = against_dir.empty() ? run_dir : against_dir;
    return compare_runs(run_dir, against, compare_out.empty() ? run_dir : compare_out, out);
  }
  // sweep
  const auto [g, z] = parse_windows(sweep_opt.windows);
  const json base = load_config_doc(sweep_opt.config_path);
  json index = json::array();
  for (const std::string& v : values) {
    json value;
    try {
      value = json::parse(v);
    } catch (const json::parse_error&) {
      value = v;
    }
    json doc = base.contains("config") && base.at("config").is_object() ? base.at("config") : base;
    set_config_path(doc, param, value);
    const ExperimentConfig cfg = resolve_config(doc, sweep_opt);
    const std::string name = sanitize(param + "=" + v);
    simulate_into(cfg, fs::path(sweep_opt.out_dir) / name, g, z, out);
    index.push_back({{"value", value}, {"directory", name}});
  }
  std::error_code ec;
  fs::create_directories(sweep_opt.out_dir, ec);
  write_json(fs::path(sweep_opt.out_dir) / "sweep.json", {{"param", param}, {"runs", index}});
  return Ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return IoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return IoFailure;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return NumericFailure;
  } catch (const SingularityError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return NumericFailure;
  } catch (const StepUnderflow& e) {
    err << "numeric failure: " << e.what() << '\n';
    return NumericFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return ConfigFailure;
  }
}

} // namespace bohmsim::cli
