#pragma once

#include "bohmsim/bohm.hpp"
#include "bohmsim/histogram.hpp"
#include "bohmsim/scenarios.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace bohmsim {

/// Uniform variate in (0, 1) for draw `index` of stream `seed`. Pure function
/// of its arguments, so results do not depend on evaluation order.
double counter_uniform(std::uint64_t seed, std::uint64_t index);

struct SampleSet {
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::FullBeam;
  std::vector<double> x0;
  std::vector<double> weight;

  std::size_t size() const { return x0.size(); }
};

/// What the slit plane looks like to the sampler.
struct SamplingTarget {
  BeamConfig beam;
  ParticleSpecies species;
  PhysicalConstants consts;
  double t1 = 0.0;
  ApertureSet apertures; // F; may be empty in full-beam mode
};

/// Full beam: x0 = sigma0 * Phi^-1(u), weight 1. Conditioned: x(t1) from
/// |psi(., t1)|^2 restricted to F by inverting its exact CDF, mapped back by
/// the linear pre-slit flow; weight = transmitted fraction. Draw i uses the
/// counter stream (seed, first_index + i). Throws ConfigError for conditioned
/// sampling with empty F.
SampleSet sample_initial_positions(std::size_t n, std::uint64_t seed, SamplingMode mode,
                                   const SamplingTarget& target, std::size_t first_index = 0);

SamplingTarget sampling_target(const ScenarioSpec& spec);

struct EnsembleOptions {
  int threads = 0;             // 0 = hardware concurrency
  int preslit_points = 8;
  std::size_t first_index = 0; // offset into the counter stream
};

/// Samples, classifies and integrates n trajectories of `spec` with one shared
/// near-field bridge. Trajectory i depends only on (seed, first_index + i), so
/// the output is identical for any thread count. Integration failures become
/// AbortedSingularity fates.
std::vector<Trajectory> run_ensemble(const ScenarioSpec& spec, std::size_t n, std::uint64_t seed,
                                     const IntegratorConfig& icfg, const EnsembleOptions& opt = {});

/// Full-beam trajectories in a packet without slits, integrated from t = 0
/// with samples at every time in `record_times`.
std::vector<Trajectory> run_free_ensemble(const ParticleSpecies& species,
                                          const PhysicalConstants& consts, const BeamConfig& beam,
                                          std::size_t n, std::uint64_t seed,
                                          std::span<const double> record_times,
                                          const IntegratorConfig& icfg, int threads = 0);

/// Screen arrivals of the transmitted, non-aborted trajectories.
std::vector<Arrival> arrivals(std::span<const Trajectory> trajectories);

/// Position of a trajectory at sample time t (must be one of its sample times).
std::optional<double> position_at(const Trajectory& tr, double t);

struct SmearResult {
  std::vector<double> nodes_vy;
  std::vector<double> node_weights;
  DensityGrid density;               // weighted mean of |psi(., t2(v))|^2 on the global window
  std::optional<DensityHistogram> hist; // pooled arrivals, absent when n_per_node == 0
  double mean_transmitted_fraction = 0.0;
};

/// Runs the scenario at k Gauss-Hermite nodes of a normal v_y distribution
/// with standard deviation rel_spread * v_y. Each node gets its own t1, t2 and
/// wavelength; n_per_node trajectories per node are pooled into one histogram
/// with weights scaled by the node weight. With rel_spread = 0 and k = 1 this
/// reproduces the unsmeared density and histogram exactly. Throws ConfigError
/// if a node velocity is <= 0.
SmearResult smear_velocity(const ScenarioSpec& spec, int k, double rel_spread, std::uint64_t seed,
                           std::size_t n_per_node, const EnsembleOptions& opt = {});

} // namespace bohmsim
