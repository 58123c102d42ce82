#include <doctest.h>

#include "approx.hpp"

#include "bohmsim/ensemble.hpp"
#include "bohmsim/scenarios.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace bohmsim;
using bohmsim::testing::rel_approx;
using bohmsim::testing::cheap_config;

namespace {

DensityGrid gaussian_mix(const std::vector<std::array<double, 3>>& comps, double lo, double hi,
                         std::size_t n)
{
  DensityGrid g;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * double(i) / double(n - 1);
    double r = 0;
    for (const auto& [c, s, a] : comps)
      r += a * std::exp(-0.5 * (x - c) * (x - c) / (s * s));
    g.x.push_back(x);
    g.rho.push_back(r);
  }
  return g;
}

} // namespace

TEST_CASE("scenario names")
{
  for (auto k : {ScenarioKind::SA1, ScenarioKind::SA2, ScenarioKind::BB, ScenarioKind::DiffractionA})
    CHECK(scenario_kind_from_string(to_string(k)) == k);
  CHECK(scenario_kind_from_string("BB") == ScenarioKind::BB);
  try {
    scenario_kind_from_string("sa3");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sa1") != std::string::npos);
  }
  CHECK(sampling_mode_from_string("full-beam") == SamplingMode::FullBeam);
  CHECK_THROWS_AS(sampling_mode_from_string("half-beam"), ConfigError);
}

TEST_CASE("scenario wiring on the default layout")
{
  const ExperimentConfig cfg;
  const ScenarioSpec sa1 = build_scenario(ScenarioKind::SA1, cfg);
  CHECK(sa1.slit_plane.size() == 101);
  CHECK(sa1.wave_apertures.size() == 101);
  CHECK(sa1.filter == ParticleFilter::None);
  CHECK_FALSE(sa1.predicts_null_density);

  const ScenarioSpec sa2 = build_scenario(ScenarioKind::SA2, cfg);
  REQUIRE(sa2.wave_apertures.size() == 1);
  CHECK(sa2.wave_apertures[0].group == ApertureGroup::A);
  CHECK(&sa2.particle_apertures() == &sa2.wave_apertures);

  const ScenarioSpec bb = build_scenario(ScenarioKind::BB, cfg);
  CHECK(bb.wave_apertures.size() == 101);
  CHECK(bb.filter == ParticleFilter::SizeAware);
  CHECK(&bb.particle_apertures() == &bb.slit_plane);

  const ScenarioSpec dif = build_scenario(ScenarioKind::DiffractionA, cfg);
  REQUIRE(dif.wave_apertures.size() == 1);
  CHECK(dif.wave_apertures[0].width == cfg.layout.a_width);
}

TEST_CASE("SA2 with every slit narrower than the particle predicts nothing")
{
  ExperimentConfig cfg;
  cfg.layout.a_width = 0.8e-9;
  const ScenarioSpec sa2 = build_scenario(ScenarioKind::SA2, cfg);
  CHECK(sa2.predicts_null_density);
  CHECK(sa2.wave_apertures.empty());
  CHECK_THROWS_AS(sa2.field(), ConfigError);
  cfg.scenario = ScenarioKind::SA2;
  cfg.sampling.trajectories = 10;
  const ScenarioResult r = run_scenario(sa2);
  CHECK(r.predicts_null_density);
  CHECK(r.trajectories.empty());
  CHECK_FALSE(r.hist.has_value());
  for (double rho : r.global.density().rho)
    CHECK(rho == 0.0);
}

TEST_CASE("BB and SA1 share the same wavefunction")
{
  const ExperimentConfig cfg;
  const WaveField a = build_scenario(ScenarioKind::SA1, cfg).field();
  const WaveField b = build_scenario(ScenarioKind::BB, cfg).field();
  for (double x : {-3.4e-3, -2e-5, 0.0, 1e-4, 4.9e-3}) {
    const Complex pa = a.evaluate(x, cfg.t2()).psi;
    const Complex pb = b.evaluate(x, cfg.t2()).psi;
    CHECK(std::abs(pa - pb) <= 1e-12 * std::abs(pa));
  }
}

TEST_CASE("peak detection on synthetic profiles")
{
  const DensityGrid g = gaussian_mix({{-3, 0.4, 1.0}, {0.5, 0.3, 0.6}, {4, 0.5, 0.005}}, -6, 6, 1201);
  const auto peaks = detect_peaks(g, 0.01, 0.5);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].position == rel_approx(-3).epsilon(1e-4));
  CHECK(peaks[1].position == rel_approx(0.5).epsilon(1e-3));
  CHECK(peaks[0].height == rel_approx(1.0).epsilon(1e-4));
  const double fwhm = 2 * std::sqrt(2 * std::log(2.0));
  CHECK(peaks[0].fwhm == rel_approx(0.4 * fwhm).epsilon(1e-3));
  CHECK(peaks[1].fwhm == rel_approx(0.3 * fwhm).epsilon(1e-3));

  // a lower threshold admits the small bump, a wide separation merges the pair
  CHECK(detect_peaks(g, 1e-3, 0.5).size() == 3);
  const auto merged = detect_peaks(g, 0.01, 5.0);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].position == rel_approx(-3).epsilon(1e-4));

  DensityGrid zero = g;
  std::fill(zero.rho.begin(), zero.rho.end(), 0.0);
  CHECK_THROWS_AS(detect_peaks(zero, 0.01, 0.5), NumericError);
}

TEST_CASE("asymmetry and lateral fraction on simple profiles")
{
  const DensityGrid sym = gaussian_mix({{0, 1, 1}}, -8, 8, 801);
  CHECK(std::abs(asymmetry_metric(sym)) < 1e-14);
  const DensityGrid right = gaussian_mix({{4, 0.5, 1}}, -8, 8, 801);
  CHECK(asymmetry_metric(right) == rel_approx(1.0).epsilon(1e-9));

  // mass outside +-1 for a unit Gaussian
  const double outside = std::erfc(1 / std::numbers::sqrt2);
  const double total = sym.total();
  CHECK(lateral_fraction(sym, 1.0, total) == rel_approx(outside).epsilon(1e-4));
  CHECK_THROWS_AS(lateral_fraction(sym, 9.0, total), ConfigError);
}

TEST_CASE("SA2 screen density is symmetric and concentrated")
{
  const ExperimentConfig cfg;
  const ScenarioSpec sa2 = build_scenario(ScenarioKind::SA2, cfg);
  const WaveField f = sa2.field();
  const DensityGrid d = wave_grid(f, cfg.t2(), 5e-3, 4096).density();
  CHECK(std::abs(asymmetry_metric(d)) < 1e-3);
  CHECK(lateral_fraction_exact(f, cfg.t2(), 1e-3) < 0.05);
  const auto peaks = detect_peaks(d, 0.01, 0.5e-3);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0].position) < 1e-6);
}

TEST_CASE("SA1 global pattern: centre and two lateral lobes")
{
  const ExperimentConfig cfg;
  const WaveField f = build_scenario(ScenarioKind::SA1, cfg).field();
  const DensityGrid d = wave_grid(f, cfg.t2(), 5e-3, 4096).density();
  const auto peaks = detect_peaks(d, 0.01, 0.5e-3);
  REQUIRE(peaks.size() == 3);
  // lobes at the grating order lambda L / period
  const double order = de_broglie_wavelength(cfg.species, cfg.beam.v_y) * cfg.geometry.d2 / 1e-9;
  CHECK(peaks[0].position == rel_approx(-order).epsilon(0.01));
  CHECK(std::abs(peaks[1].position) < 1e-6);
  CHECK(peaks[2].position == rel_approx(order).epsilon(0.01));
  const double lat = lateral_fraction_exact(f, cfg.t2(), 1e-3);
  CHECK(lat > 0.1);
  CHECK(lat < 0.3);
  // grid estimate and quadrature agree
  CHECK(lateral_fraction(d, 1e-3, transmitted_fraction(f.context())) ==
        rel_approx(lat).epsilon(1e-3));
}

TEST_CASE("run_scenario end to end on the cheap layout")
{
  ExperimentConfig cfg = cheap_config();
  cfg.sampling.trajectories = 300;
  const ScenarioResult r = run_scenario(build_scenario(ScenarioKind::SA1, cfg));
  CHECK(r.trajectories.size() == 300);
  REQUIRE(r.hist.has_value());
  REQUIRE(r.histogram_vs_density.has_value());
  CHECK(r.histogram_vs_density->tv_distance < 0.15);
  CHECK(r.fates.at(Fate::TransmittedA) + r.fates.at(Fate::TransmittedB) == 300);
  CHECK(r.global.x.size() == cfg.windows.global_points);
  CHECK(r.zoom.x.size() == cfg.windows.zoom_points);
  CHECK(r.predicted_peaks.size() == r.density_peaks_global.size());
  CHECK(r.transmitted_fraction > 0.05);
}

TEST_CASE("an equal-mass mixture of rescaled Gaussians has a smaller FWHM")
{
  // Second-order effect behind the central screen peak under velocity
  // smearing: copies of a peak scaled by 1 +- eps keep unit mass, so the
  // narrower ones are taller and sharpen the top of the average.
  const double eps = 0.05;
  DensityGrid g;
  for (int i = 0; i <= 4000; ++i) {
    const double x = -6 + 12 * i / 4000.0;
    double r = 0;
    for (double s : {1 - eps, 1 + eps})
      r += 0.5 / s * std::exp(-0.5 * x * x / (s * s));
    g.x.push_back(x);
    g.rho.push_back(r);
  }
  const auto peaks = detect_peaks(g, 0.01, 1.0);
  REQUIRE(peaks.size() == 1);
  const double unmixed = 2 * std::sqrt(2 * std::log(2.0));
  CHECK(peaks[0].fwhm < unmixed);
  // Expanding to eps^2, the mixture is phi(x) (1 + eps^2 q(x) / 2) with
  // q = x^4 - 5 x^2 + 2, which moves the half-height point x_h by
  // eps^2 (q(x_h) / 2 - 1) / x_h.
  const double xh = 0.5 * unmixed;
  const double q = std::pow(xh, 4) - 5 * xh * xh + 2;
  const double predicted = eps * eps * (0.5 * q - 1) / (xh * xh);
  CHECK((peaks[0].fwhm - unmixed) / unmixed == rel_approx(predicted).epsilon(0.02));
}
