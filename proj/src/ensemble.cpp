#include "bohmsim/ensemble.hpp"

#include "bohmsim/quadrature.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <thread>

namespace bohmsim {

namespace {

std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Point in [a, b] with `mass` of N(0, sigma^2) between a and it.
double normal_invert(double a, double b, double sigma, double mass)
{
  const double s = std::numbers::sqrt2 * sigma;
  double x;
  if (a >= 0) {
    const double target = std::erfc(a / s) - 2 * mass;
    x = target > 0 ? s * boost::math::erfc_inv(target) : b;
  } else if (b <= 0) {
    const double target = std::erfc(-a / s) - 2 * mass; // erfc(-x/s) decreases in x
    x = target > 0 ? -s * boost::math::erfc_inv(target) : b;
  } else {
    const double target = std::erf(a / s) + 2 * mass;
    x = std::abs(target) < 1 ? s * boost::math::erf_inv(target) : b;
  }
  return std::clamp(x, a, b);
}

int resolve_threads(int threads)
{
  if (threads > 0)
    return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Calls body(i) for i in [0, n) on `threads` workers; each index is touched
// by exactly one worker, so writes to per-index slots need no locking.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body)
{
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
      body(i);
  };
  std::vector<std::jthread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count - 1);
  for (std::size_t w = 1; w < count; ++w)
    pool.emplace_back(worker);
  worker();
}

double preslit_velocity(double x0, double t, const BeamConfig& beam, const ParticleSpecies& sp,
                        const PhysicalConstants& c)
{
  const double tau = c.hbar / (2 * sp.mass * beam.sigma0 * beam.sigma0);
  const double g = tau * t;
  return x0 * tau * g / std::sqrt(1 + g * g);
}

void add_preslit_samples(Trajectory& tr, double t1, int points, const BeamConfig& beam,
                         const ParticleSpecies& sp, const PhysicalConstants& c)
{
  tr.samples.push_back({0.0, tr.x0, 0.0});
  for (int k = 1; k <= points; ++k) {
    const double t = t1 * k / (points + 1);
    tr.samples.push_back(
        {t, preslit_position(tr.x0, t, beam, sp, c), preslit_velocity(tr.x0, t, beam, sp, c)});
  }
  tr.samples.push_back(
      {t1, preslit_position(tr.x0, t1, beam, sp, c), preslit_velocity(tr.x0, t1, beam, sp, c)});
}

} // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t index)
{
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

SamplingTarget sampling_target(const ScenarioSpec& spec)
{
  const ExperimentConfig& c = spec.config;
  return {c.beam, c.species, c.consts, c.t1(), spec.particle_apertures()};
}

SampleSet sample_initial_positions(std::size_t n, std::uint64_t seed, SamplingMode mode,
                                   const SamplingTarget& target, std::size_t first_index)
{
  SampleSet set;
  set.seed = seed;
  set.mode = mode;
  set.x0.resize(n);
  set.weight.resize(n);
  const double sigma0 = target.beam.sigma0;
  if (mode == SamplingMode::FullBeam) {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = counter_uniform(seed, first_index + i);
      set.x0[i] = sigma0 * std::numbers::sqrt2 * boost::math::erf_inv(2 * u - 1);
      set.weight[i] = 1.0;
    }
    return set;
  }

  const ApertureSet& F = target.apertures;
  if (F.empty())
    throw ConfigError("conditioned sampling needs at least one aperture");
  const double sigma1 = sigma_t(target.t1, target.beam, target.species, target.consts);
  std::vector<double> cumulative(F.size() + 1, 0.0);
  for (std::size_t j = 0; j < F.size(); ++j)
    cumulative[j + 1] = cumulative[j] + gaussian_mass(F[j].left(), F[j].right(), sigma1);
  const double total = cumulative.back();
  if (!(total > 0))
    throw ConfigError("conditioned sampling: the apertures carry no probability");

  for (std::size_t i = 0; i < n; ++i) {
    const double q = counter_uniform(seed, first_index + i) * total;
    auto it = std::upper_bound(cumulative.begin() + 1, cumulative.end(), q);
    std::size_t j = static_cast<std::size_t>(it - cumulative.begin()) - 1;
    j = std::min(j, F.size() - 1);
    const Aperture& ap = F[j];
    const double x1 = normal_invert(ap.left(), ap.right(), sigma1, q - cumulative[j]);
    // map back and make sure the forward map lands inside the same aperture
    double x0 = x1 * sigma0 / sigma1;
    const double toward = ap.center * sigma0 / sigma1;
    for (int k = 0; k < 64 && !ap.contains(preslit_position(x0, target.t1, target.beam,
                                                           target.species, target.consts));
         ++k)
      x0 = std::nextafter(x0, toward);
    set.x0[i] = x0;
    set.weight[i] = total;
  }
  return set;
}

std::vector<Trajectory> run_ensemble(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed,
                                     const IntegratorConfig& icfg, const EnsembleOptions& opt)
{
  std::vector<Trajectory> out(n);
  if (n == 0)
    return out;
  icfg.validate();
  const ExperimentConfig& cfg = spec.config;
  const double t1 = cfg.t1(), t2 = cfg.t2();
  const SamplingTarget target = sampling_target(spec);
  const SampleSet draws =
      sample_initial_positions(n, seed, cfg.sampling.mode, target, opt.first_index);
  const bool size_filter = spec.filter == ParticleFilter::SizeAware;

  std::optional<WaveField> field;
  std::optional<NearFieldBridge> bridge;
  if (!spec.predicts_null_density) {
    field.emplace(spec.field());
    if (icfg.near_field == NearField::Bridge)
      bridge.emplace(*field, t2, icfg);
  }

  parallel_for(n, resolve_threads(opt.threads), [&](std::size_t i) {
    Trajectory& tr = out[i];
    tr.id = opt.first_index + i;
    tr.x0 = draws.x0[i];
    tr.weight = draws.weight[i];
    add_preslit_samples(tr, t1, opt.preslit_points, cfg.beam, cfg.species, cfg.consts);
    const double x_t1 = tr.samples.back().x;
    tr.fate = classify_at_slits(x_t1, target.apertures, cfg.species, cfg.transmission, size_filter);
    if (!is_transmitted(tr.fate))
      return;
    try {
      double t_start = t1 + icfg.dt_min;
      double x_start = x_t1;
      if (bridge) {
        t_start = bridge->time();
        x_start = bridge->position(bridge->slit_plane_mass(x_t1));
      }
      double v_start = 0.0;
      try {
        v_start = velocity(x_start, t_start, *field, icfg);
      } catch (const SingularityError&) {
        // integrate_guidance reports the failure below
      }
      tr.samples.push_back({t_start, x_start, v_start});
      const auto record = post_slit_record_times(t1, t_start, t2, icfg);
      IntegrationResult res = integrate_guidance(x_start, t_start, t2, *field, icfg, record);
      tr.steps = res.steps;
      tr.samples.insert(tr.samples.end(), res.samples.begin(), res.samples.end());
      if (!res.ok) {
        tr.fate = Fate::AbortedSingularity;
        tr.abort_reason = res.error;
      }
    } catch (const std::exception& e) {
      tr.fate = Fate::AbortedSingularity;
      tr.abort_reason = e.what();
    }
  });
  return out;
}

std::vector<Trajectory> run_free_ensemble(const ParticleSpecies& species,
                                          const PhysicalConstants& consts, const BeamConfig& beam,
                                          std::size_t n, std::uint64_t seed,
                                          std::span<const double> record_times,
                                          const IntegratorConfig& icfg, int threads)
{
  std::vector<Trajectory> out(n);
  if (n == 0)
    return out;
  icfg.validate();
  if (record_times.empty() || !std::is_sorted(record_times.begin(), record_times.end()) ||
      !(record_times.front() > 0))
    throw ConfigError("free ensemble needs sorted positive record times");
  const WaveField field = WaveField::free(species, consts, beam);
  const SampleSet draws =
      sample_initial_positions(n, seed, SamplingMode::FullBeam, {beam, species, consts, 0.0, {}});
  const double t_end = record_times.back();
  parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    Trajectory& tr = out[i];
    tr.id = i;
    tr.x0 = draws.x0[i];
    tr.weight = 1.0;
    tr.fate = Fate::TransmittedA;
    tr.samples.push_back({0.0, tr.x0, 0.0});
    IntegrationResult res = integrate_guidance(tr.x0, 0.0, t_end, field, icfg, record_times);
    tr.steps = res.steps;
    tr.samples.insert(tr.samples.end(), res.samples.begin(), res.samples.end());
    if (!res.ok) {
      tr.fate = Fate::AbortedSingularity;
      tr.abort_reason = res.error;
    }
  });
  return out;
}

std::vector<Arrival> arrivals(std::span<const Trajectory> trajectories)
{
  std::vector<Arrival> out;
  for (const Trajectory& tr : trajectories)
    if (is_transmitted(tr.fate))
      out.push_back({tr.final_x(), tr.weight});
  return out;
}

std::optional<double> position_at(const Trajectory& tr, double t)
{
  const auto it = std::lower_bound(tr.samples.begin(), tr.samples.end(), t,
                                   [](const TrajectoryState& s, double v) { return s.t < v; });
  if (it == tr.samples.end() || it->t != t)
    return std::nullopt;
  return it->x;
}

SmearResult smear_velocity(const ScenarioSpec& spec, int k, double rel_spread, std::uint64_t seed,
                           std::size_t n_per_node, const EnsembleOptions& opt)
{
  if (k < 1)
    throw ConfigError("smear_velocity needs k >= 1");
  if (!(rel_spread >= 0))
    throw ConfigError("smear_velocity needs a non-negative spread");
  const ExperimentConfig& base = spec.config;
  const GaussLegendreRule gh = gauss_hermite(k);
  const double sd = rel_spread * base.beam.v_y;

  SmearResult r;
  const WindowConfig& win = base.windows;
  std::vector<Arrival> pooled;
  for (int j = 0; j < k; ++j) {
    // X ~ N(0, 1/2) at the nodes, so v = v_y + sqrt(2) sd X has deviation sd
    const double v = base.beam.v_y + std::numbers::sqrt2 * sd * gh.nodes[static_cast<std::size_t>(j)];
    const double w = gh.weights[static_cast<std::size_t>(j)];
    if (!(v > 0))
      throw ConfigError("smear_velocity: a v_y node is not positive");
    r.nodes_vy.push_back(v);
    r.node_weights.push_back(w);

    ExperimentConfig cfg = base;
    cfg.beam.v_y = v;
    const ScenarioSpec node = build_scenario(spec.kind, cfg);
    if (node.predicts_null_density)
      continue;
    const WaveField field = node.field();
    const WaveGrid g = wave_grid(field, cfg.t2(), win.global_half_width, win.global_points);
    const DensityGrid d = g.density();
    if (r.density.x.empty()) {
      r.density.x = d.x;
      r.density.rho.assign(d.rho.size(), 0.0);
    }
    for (std::size_t i = 0; i < d.rho.size(); ++i)
      r.density.rho[i] += w * d.rho[i];
    r.mean_transmitted_fraction += w * transmitted_fraction(field.context());

    if (n_per_node > 0) {
      EnsembleOptions o = opt;
      o.first_index = opt.first_index + static_cast<std::size_t>(j) * n_per_node;
      const auto trs = run_ensemble(node, n_per_node, seed, cfg.integrator, o);
      for (Arrival a : arrivals(trs)) {
        a.weight *= w;
        pooled.push_back(a);
      }
    }
  }
  if (!pooled.empty())
    r.hist = histogram(pooled, -win.global_half_width, win.global_half_width,
                       base.analysis.histogram_bins);
  return r;
}

} // namespace bohmsim
