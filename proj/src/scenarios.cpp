#include "bohmsim/scenarios.hpp"

#include "bohmsim/ensemble.hpp"
#include "bohmsim/quadrature.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

namespace bohmsim {

std::string to_string(ScenarioKind kind)
{
  switch (kind) {
  case ScenarioKind::SA1: return "sa1";
  case ScenarioKind::SA2: return "sa2";
  case ScenarioKind::BB: return "bb";
  case ScenarioKind::DiffractionA: return "diffraction";
  }
  return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& s)
{
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ScenarioKind k :
       {ScenarioKind::SA1, ScenarioKind::SA2, ScenarioKind::BB, ScenarioKind::DiffractionA})
    if (to_string(k) == lower)
      return k;
  throw ConfigError("unknown scenario '" + s + "' (valid: sa1, sa2, bb, diffraction)");
}

std::string to_string(SamplingMode mode)
{
  return mode == SamplingMode::FullBeam ? "full-beam" : "conditioned";
}

SamplingMode sampling_mode_from_string(const std::string& s)
{
  if (s == "full-beam")
    return SamplingMode::FullBeam;
  if (s == "conditioned")
    return SamplingMode::Conditioned;
  throw ConfigError("unknown sampling mode '" + s + "' (valid: full-beam, conditioned)");
}

ApertureSet SlitLayout::build() const
{
  if (explicit_apertures)
    return ApertureSet(*explicit_apertures);
  if (!(a_width > 0))
    throw ConfigError("slit A width must be > 0");
  ApertureSet a({{a_center, a_width, ApertureGroup::A}});
  if (b_slits == 0)
    return a;
  return a.merged(make_grating(b_center, b_slits, b_width, b_period, ApertureGroup::B));
}

void ExperimentConfig::validate() const
{
  consts.validate();
  species.validate();
  beam.validate();
  geometry.validate();
  integrator.validate();
  if (layout.build().empty())
    throw ConfigError("the slit plane has no aperture");
  if (!(windows.global_half_width > 0) || !(windows.zoom_half_width > 0) ||
      windows.global_points < 3 || windows.zoom_points < 3)
    throw ConfigError("windows need positive half-widths and at least 3 points");
  const AnalysisConfig& a = analysis;
  if (a.histogram_bins < 1)
    throw ConfigError("histogram needs at least one bin");
  if (!(a.global_threshold > 0 && a.global_threshold < 1) ||
      !(a.zoom_threshold > 0 && a.zoom_threshold < 1))
    throw ConfigError("peak thresholds must lie in (0, 1)");
  if (!(a.global_separation > 0) || !(a.zoom_separation > 0) || !(a.lateral_window > 0))
    throw ConfigError("peak separations and the lateral window must be > 0");
  if (smear.nodes < 1 || !(smear.rel_spread >= 0))
    throw ConfigError("smearing needs nodes >= 1 and rel_spread >= 0");
  if (sampling.threads < 0 || sampling.preslit_points < 0)
    throw ConfigError("sampling threads and preslit_points must be >= 0");
}

const ApertureSet& ScenarioSpec::particle_apertures() const
{
  return filter == ParticleFilter::SizeAware ? slit_plane : wave_apertures;
}

WaveField ScenarioSpec::field() const
{
  if (predicts_null_density || wave_apertures.empty())
    throw ConfigError("scenario " + to_string(kind) + " has no open aperture for the wave");
  const ExperimentConfig& c = config;
  return WaveField::slits(
      PropagationContext(c.species, c.consts, c.beam, c.t1(), wave_apertures));
}

ScenarioSpec build_scenario(ScenarioKind kind, const ExperimentConfig& config)
{
  config.validate();
  ScenarioSpec spec;
  spec.kind = kind;
  spec.config = config;
  spec.config.scenario = kind;
  spec.slit_plane = config.layout.build();
  switch (kind) {
  case ScenarioKind::SA1:
    spec.wave_apertures = spec.slit_plane;
    break;
  case ScenarioKind::BB:
    spec.wave_apertures = spec.slit_plane;
    spec.filter = ParticleFilter::SizeAware;
    break;
  case ScenarioKind::SA2: {
    std::vector<Aperture> open;
    for (const Aperture& ap : spec.slit_plane)
      if (transmits(ap, config.species, ap.center, config.transmission))
        open.push_back(ap);
    spec.wave_apertures = ApertureSet(std::move(open));
    spec.predicts_null_density = spec.wave_apertures.empty();
    break;
  }
  case ScenarioKind::DiffractionA:
    spec.wave_apertures = spec.slit_plane.filtered(ApertureGroup::A);
    spec.predicts_null_density = spec.wave_apertures.empty();
    break;
  }
  return spec;
}

DensityGrid WaveGrid::density() const
{
  DensityGrid d;
  d.x = x;
  d.rho.reserve(psi.size());
  for (const Complex& p : psi)
    d.rho.push_back(std::norm(p));
  return d;
}

WaveGrid wave_grid(const WaveField& field, double t, double half_width, std::size_t n)
{
  if (n < 2 || !(half_width > 0))
    throw ConfigError("wave grid needs n >= 2 and a positive half-width");
  WaveGrid g;
  g.x.resize(n);
  g.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.x[i] = -half_width + 2 * half_width * static_cast<double>(i) / static_cast<double>(n - 1);
    g.psi[i] = field.evaluate(g.x[i], t).psi;
  }
  return g;
}

std::vector<Peak> detect_peaks(const DensityGrid& grid, double rel_threshold,
                               double min_separation)
{
  const auto& x = grid.x;
  const auto& y = grid.rho;
  if (x.size() != y.size() || x.size() < 3)
    throw ConfigError("peak detection needs at least three grid points");
  const double top = *std::max_element(y.begin(), y.end());
  if (!(top > 0))
    throw NumericError("peak detection on an all-zero grid");

  struct Candidate {
    std::size_t i;
    Peak p;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] >= rel_threshold * top && y[i] >= y[i - 1] && y[i] > y[i + 1]))
      continue;
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double denom = y0 - 2 * y1 + y2;
    double delta = denom < 0 ? 0.5 * (y0 - y2) / denom : 0.0;
    delta = std::clamp(delta, -0.5, 0.5);
    const double dx = delta >= 0 ? x[i + 1] - x[i] : x[i] - x[i - 1];
    Peak p;
    p.position = x[i] + delta * dx;
    p.height = y1 - 0.25 * (y0 - y2) * delta;

    const double half = 0.5 * p.height;
    double left = x.front(), right = x.back();
    for (std::size_t j = i; j > 0; --j)
      if (y[j - 1] < half) {
        left = x[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1]);
        break;
      }
    for (std::size_t j = i; j + 1 < y.size(); ++j)
      if (y[j + 1] < half) {
        right = x[j] + (y[j] - half) / (y[j] - y[j + 1]) * (x[j + 1] - x[j]);
        break;
      }
    p.fwhm = right - left;
    cands.push_back({i, p});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.p.height > b.p.height; });
  std::vector<Peak> kept;
  for (const Candidate& c : cands) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Peak& k) {
      return std::abs(k.position - c.p.position) >= min_separation;
    });
    if (clear)
      kept.push_back(c.p);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Peak& a, const Peak& b) { return a.position < b.position; });
  return kept;
}

double asymmetry_metric(const DensityGrid& grid)
{
  if (grid.size() < 2)
    throw ConfigError("asymmetry needs at least two grid points");
  const double right = grid.integrate(0.0, grid.x.back());
  const double left = grid.integrate(grid.x.front(), 0.0);
  const double total = left + right;
  if (!(total > 0))
    throw NumericError("asymmetry of a density with zero mass");
  return (right - left) / total;
}

double lateral_fraction(const DensityGrid& grid, double window, double normalizer)
{
  if (!(window >= 0) || grid.size() < 2 || -window < grid.x.front() || window > grid.x.back())
    throw ConfigError("lateral window lies outside the grid");
  if (!(normalizer > 0))
    throw NumericError("lateral fraction needs a positive normalizer");
  return 1.0 - grid.integrate(-window, window) / normalizer;
}

double lateral_fraction_exact(const WaveField& field, double t, double window)
{
  if (!field.has_slits())
    throw ConfigError("lateral fraction needs a field behind a slit plane");
  const double total = transmitted_fraction(field.context());
  if (window <= 0)
    return 1.0;
  // panels of at most 1 um resolve the central structure for the default
  // geometry comfortably; GL-10 per panel
  const int panels = std::max(16, static_cast<int>(std::ceil(2 * window / 1e-6)));
  const double inner =
      integrate_composite([&](double x) { return field.evaluate(x, t).rho; }, -window, window,
                          panels, 10);
  return 1.0 - inner / total;
}

namespace {

double arrival_asymmetry(std::span<const Arrival> arr)
{
  double left = 0, right = 0;
  for (const Arrival& a : arr) {
    if (a.x > 0)
      right += a.weight;
    else if (a.x < 0)
      left += a.weight;
  }
  const double total = left + right;
  if (!(total > 0))
    throw NumericError("asymmetry of an empty arrival set");
  return (right - left) / total;
}

double arrival_lateral(std::span<const Arrival> arr, double window)
{
  double out = 0, total = 0;
  for (const Arrival& a : arr) {
    total += a.weight;
    if (std::abs(a.x) > window)
      out += a.weight;
  }
  return total > 0 ? out / total : 0.0;
}

WaveGrid empty_grid(double half_width, std::size_t n)
{
  WaveGrid g;
  for (std::size_t i = 0; i < n; ++i)
    g.x.push_back(-half_width + 2 * half_width * static_cast<double>(i) / static_cast<double>(n - 1));
  g.psi.assign(n, Complex{});
  return g;
}

} // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec)
{
  using clock = std::chrono::steady_clock;
  const ExperimentConfig& cfg = spec.config;
  const WindowConfig& win = cfg.windows;
  const AnalysisConfig& an = cfg.analysis;
  ScenarioResult r;
  r.kind = spec.kind;
  r.predicts_null_density = spec.predicts_null_density;

  auto t0 = clock::now();
  if (spec.predicts_null_density) {
    r.global = empty_grid(win.global_half_width, win.global_points);
    r.zoom = empty_grid(win.zoom_half_width, win.zoom_points);
    return r;
  }
  const WaveField field = spec.field();
  const double t2 = cfg.t2();
  r.global = wave_grid(field, t2, win.global_half_width, win.global_points);
  r.zoom = wave_grid(field, t2, win.zoom_half_width, win.zoom_points);
  const DensityGrid global = r.global.density();
  r.density_peaks_global = detect_peaks(global, an.global_threshold, an.global_separation);
  r.density_peaks_zoom = detect_peaks(r.zoom.density(), an.zoom_threshold, an.zoom_separation);
  r.transmitted_fraction = transmitted_fraction(field.context());
  r.seconds_density = std::chrono::duration<double>(clock::now() - t0).count();

  t0 = clock::now();
  EnsembleOptions opt;
  opt.threads = cfg.sampling.threads;
  opt.preslit_points = cfg.sampling.preslit_points;
  r.trajectories = run_ensemble(spec, cfg.sampling.trajectories, cfg.sampling.seed,
                                cfg.integrator, opt);
  r.seconds_ensemble = std::chrono::duration<double>(clock::now() - t0).count();
  for (const Trajectory& tr : r.trajectories)
    ++r.fates[tr.fate];

  const std::vector<Arrival> arr = arrivals(r.trajectories);
  if (!arr.empty()) {
    r.hist = histogram(arr, -win.global_half_width, win.global_half_width, an.histogram_bins);
    r.histogram_peaks = detect_peaks(r.hist->as_grid(), an.global_threshold, an.global_separation);
    r.histogram_vs_density = compare_histogram_to_density(*r.hist, global);
  }

  if (spec.filter == ParticleFilter::SizeAware) {
    // the screen density is whatever survives the filter
    r.predicted_peaks = r.histogram_peaks;
    if (!arr.empty()) {
      r.asymmetry = arrival_asymmetry(arr);
      r.lateral_fraction = arrival_lateral(arr, an.lateral_window);
    }
  } else {
    r.predicted_peaks = r.density_peaks_global;
    r.asymmetry = asymmetry_metric(global);
    r.lateral_fraction = lateral_fraction_exact(field, t2, an.lateral_window);
  }
  return r;
}

} // namespace bohmsim
