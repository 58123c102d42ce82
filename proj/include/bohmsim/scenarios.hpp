#pragma once

#include "bohmsim/bohm.hpp"
#include "bohmsim/core.hpp"
#include "bohmsim/histogram.hpp"
#include "bohmsim/propagator.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bohmsim {

enum class ScenarioKind { SA1, SA2, BB, DiffractionA };

std::string to_string(ScenarioKind kind);
/// Accepts "sa1", "sa2", "bb", "diffraction" (case-insensitive). Throws
/// ConfigError listing the valid names otherwise.
ScenarioKind scenario_kind_from_string(const std::string& s);

enum class SamplingMode { FullBeam, Conditioned };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& s);

/// Slit A plus grating B, or an explicit aperture list replacing both.
struct SlitLayout {
  double a_center = 0.0;
  double a_width = 50e-9;
  double b_center = 150e-9;
  int b_slits = 100;
  double b_width = 0.5e-9;
  double b_period = 1e-9;
  std::optional<std::vector<Aperture>> explicit_apertures;

  ApertureSet build() const;
};

struct SamplingConfig {
  SamplingMode mode = SamplingMode::Conditioned;
  std::size_t trajectories = 1000;
  std::uint64_t seed = 1;
  int threads = 0;             // 0 = hardware concurrency
  int preslit_points = 8;      // recorded samples in (0, t1)
  std::size_t export_trajectories = 200; // rows written to trajectories.csv
};

struct WindowConfig {
  double global_half_width = 5e-3;
  std::size_t global_points = 4096;
  double zoom_half_width = 60e-6;
  std::size_t zoom_points = 1024;
};

struct AnalysisConfig {
  std::size_t histogram_bins = 128;
  double global_threshold = 0.01;
  double global_separation = 0.5e-3;
  double zoom_threshold = 0.02;
  double zoom_separation = 8e-6;
  double lateral_window = 1e-3;
};

struct SmearConfig {
  double rel_spread = 0.0; // v_y spread / v_y
  // Fewer than about 15 nodes leave the +-3.45 mm lobes as a comb of shifted
  // copies at a 1% spread; 21 is converged to 0.5% in the lobe width.
  int nodes = 21;
};

struct ExperimentConfig {
  ParticleSpecies species;
  PhysicalConstants consts;
  BeamConfig beam;
  GeometryConfig geometry;
  SlitLayout layout;
  TransmissionMode transmission = TransmissionMode::CenterInAperture;
  ScenarioKind scenario = ScenarioKind::SA1;
  IntegratorConfig integrator;
  SamplingConfig sampling;
  WindowConfig windows;
  AnalysisConfig analysis;
  SmearConfig smear;

  void validate() const;
  double t1() const { return geometry.t1(beam.v_y); }
  double t2() const { return geometry.t2(beam.v_y); }
};

enum class ParticleFilter { None, SizeAware };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::SA1;
  ExperimentConfig config;
  ApertureSet slit_plane;     // every physical opening (A and B)
  ApertureSet wave_apertures; // where the wavefunction passes
  ParticleFilter filter = ParticleFilter::None;
  bool predicts_null_density = false;

  /// Openings a trajectory may cross: the wave apertures, except under the
  /// size-aware filter, where particles reach every opening and are then
  /// stopped by the ones narrower than themselves.
  const ApertureSet& particle_apertures() const;
  /// Wave field behind the slit plane; throws ConfigError for a null scenario.
  WaveField field() const;
};

ScenarioSpec build_scenario(ScenarioKind kind, const ExperimentConfig& config);

/// Uniform grid of n points on [-half_width, half_width] at time t.
struct WaveGrid {
  std::vector<double> x;
  std::vector<Complex> psi;
  DensityGrid density() const;
};

WaveGrid wave_grid(const WaveField& field, double t, double half_width, std::size_t n);

struct Peak {
  double position = 0.0;
  double height = 0.0;
  double fwhm = 0.0;
};

/// Local maxima of height >= rel_threshold * max, greedily kept in order of
/// height while at least min_separation from every kept peak; returned sorted
/// by position. Position and height come from a parabola through the three
/// samples around the maximum; the FWHM from linear interpolation of the
/// half-height crossings. Throws NumericError on an all-zero grid.
std::vector<Peak> detect_peaks(const DensityGrid& grid, double rel_threshold,
                               double min_separation);

/// (mass at x > 0 - mass at x < 0) / total mass.
double asymmetry_metric(const DensityGrid& grid);

/// Fraction of `normalizer` lying at |x| > window, the mass inside the window
/// taken from the grid. The grid must extend past +-window.
double lateral_fraction(const DensityGrid& grid, double window, double normalizer);

/// Same quantity from Gauss-Legendre quadrature of the field itself.
double lateral_fraction_exact(const WaveField& field, double t, double window);

using FateTally = std::map<Fate, std::size_t>;

struct ScenarioResult {
  ScenarioKind kind = ScenarioKind::SA1;
  bool predicts_null_density = false;
  WaveGrid global;
  WaveGrid zoom;
  std::vector<Trajectory> trajectories;
  std::optional<DensityHistogram> hist; // absent when nothing arrived
  std::vector<Peak> density_peaks_global;
  std::vector<Peak> density_peaks_zoom;
  std::vector<Peak> histogram_peaks;
  /// Peaks of the quantity the scenario predicts on the screen: the |psi|^2
  /// grid for SA1, SA2 and DiffractionA, the arrival histogram for BB.
  std::vector<Peak> predicted_peaks;
  double lateral_fraction = 0.0;
  double asymmetry = 0.0;           // of the predicted screen density
  double transmitted_fraction = 0.0;
  std::optional<ComparisonReport> histogram_vs_density;
  FateTally fates;
  double seconds_density = 0.0;
  double seconds_ensemble = 0.0;
};

/// Grids, ensemble, histogram and metrics for one scenario.
ScenarioResult run_scenario(const ScenarioSpec& spec);

} // namespace bohmsim
