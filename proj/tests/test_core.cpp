#include <doctest.h>

#include "approx.hpp"

#include "bohmsim/core.hpp"
#include "bohmsim/quadrature.hpp"

#include <cmath>
#include <numbers>

using namespace bohmsim;
using bohmsim::testing::rel_approx;

namespace {

// rho integrated with composite Gauss-Legendre, independent of any closed form
double numeric_norm(double t, const BeamConfig& beam, double half_width)
{
  const ParticleSpecies sp;
  const PhysicalConstants c;
  return integrate_composite(
      [&](double x) { return std::norm(psi_free(x, t, beam, sp, c)); }, -half_width, half_width,
      64, 20);
}

} // namespace

TEST_CASE("constants: h and hbar agree to rounding")
{
  const PhysicalConstants c;
  CHECK(std::abs(c.h - 2 * std::numbers::pi * c.hbar) / c.h < 1e-15);
  CHECK_NOTHROW(c.validate());
  PhysicalConstants bad;
  bad.hbar = 1.054571817e-34 * 1.001;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("species presets and validation")
{
  const ParticleSpecies c60 = species_preset("C60");
  CHECK(c60.mass == 1.2e-24);
  CHECK(c60.diameter == 1e-9);
  CHECK(species_preset("point").diameter == 0.0);
  CHECK_THROWS_AS(species_preset("neutron"), ConfigError);
  ParticleSpecies bad = c60;
  bad.mass = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config records reject non-physical values")
{
  BeamConfig b;
  b.sigma0 = -1;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  b = {};
  b.v_y_spread = -1;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  GeometryConfig g;
  g.d2 = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  const GeometryConfig ok;
  CHECK(ok.t1(200) == rel_approx(5e-3));
  CHECK(ok.t2(200) == rel_approx(11.25e-3));
}

TEST_CASE("psi0 value, parity and decay")
{
  const BeamConfig beam;
  // (2 pi sigma0^2)^(-1/4) evaluated by hand for sigma0 = 2 um
  CHECK(psi0(0, beam).real() == rel_approx(446.6).epsilon(1e-4));
  CHECK(psi0(0, beam).imag() == 0.0);
  for (double x : {1e-7, 3e-6, 1e-5})
    CHECK(psi0(x, beam).real() == psi0(-x, beam).real());
  CHECK(std::abs(psi0(1e-4, beam)) < 1e-100);
}

TEST_CASE("s_param components")
{
  const BeamConfig beam;
  const ParticleSpecies sp;
  const PhysicalConstants c;
  CHECK(s_param(0, beam, sp, c) == Complex(beam.sigma0, 0));
  const Complex s = s_param(5e-3, beam, sp, c);
  CHECK(s.real() == beam.sigma0);
  CHECK(s.imag() / beam.sigma0 == rel_approx(0.05493).epsilon(1e-3));
  CHECK(s_param(10e-3, beam, sp, c).imag() == rel_approx(2 * s.imag()).epsilon(1e-15));
}

TEST_CASE("psi_free: reduction at t = 0, normalization, parity")
{
  const BeamConfig beam;
  const ParticleSpecies sp;
  const PhysicalConstants c;
  for (double x : {0.0, 1e-6, -3e-6})
    CHECK(std::abs(psi_free(x, 0, beam, sp, c) - psi0(x, beam)) < 1e-12 * std::abs(psi0(0, beam)));
  for (double t : {0.0, 1e-3, 5e-3}) {
    const double sig = sigma_t(t, beam, sp, c);
    CHECK(numeric_norm(t, beam, 10 * sig) == rel_approx(1.0).epsilon(1e-6));
    CHECK(std::abs(psi_free(2e-6, t, beam, sp, c) - psi_free(-2e-6, t, beam, sp, c)) == 0.0);
  }
  // peak density from the modulus of the spreading packet
  const double ratio = sigma_t(5e-3, beam, sp, c) / beam.sigma0;
  CHECK(ratio == rel_approx(1.0015073).epsilon(1e-7));
  const double sig = beam.sigma0 * ratio;
  CHECK(std::norm(psi_free(0, 5e-3, beam, sp, c)) ==
        rel_approx(1 / (std::sqrt(2 * std::numbers::pi) * sig)).epsilon(1e-12));
}

TEST_CASE("grad_psi_free matches a central difference")
{
  const BeamConfig beam;
  const ParticleSpecies sp;
  const PhysicalConstants c;
  const double h = 1e-10;
  for (double x : {-3e-6, 5e-7, 4e-6}) {
    const Complex fd = (psi_free(x + h, 5e-3, beam, sp, c) - psi_free(x - h, 5e-3, beam, sp, c)) /
                       (2 * h);
    const Complex g = grad_psi_free(x, 5e-3, beam, sp, c);
    CHECK(std::abs(g - fd) / std::abs(g) < 1e-6);
  }
}

TEST_CASE("de Broglie wavelength")
{
  const ParticleSpecies c60;
  CHECK(de_broglie_wavelength(c60, 200) == rel_approx(2.761e-12).epsilon(1e-3));
  CHECK(de_broglie_wavelength(c60, 400) == rel_approx(de_broglie_wavelength(c60, 200) / 2));
  const ParticleSpecies unit{"unit", 6.62607015e-34, 0};
  CHECK(de_broglie_wavelength(unit, 1.0) == rel_approx(1.0));
}

TEST_CASE("make_grating geometry")
{
  const ApertureSet g = make_grating(150e-9, 100, 0.5e-9, 1e-9);
  REQUIRE(g.size() == 100);
  CHECK(g[0].center == rel_approx(150e-9 - 49.5e-9));
  CHECK(g[99].right() - g[0].left() == rel_approx(99.5e-9));
  for (std::size_t i = 1; i < g.size(); ++i)
    CHECK(g[i].left() - g[i - 1].right() == rel_approx(0.5e-9).epsilon(1e-6));
  const ApertureSet one = make_grating(3e-9, 1, 2e-9, 1e-9);
  REQUIRE(one.size() == 1);
  CHECK(one[0].center == 3e-9);
  CHECK(one[0].width == 2e-9);
  CHECK_THROWS_AS(make_grating(0, 10, 2e-9, 1e-9), ConfigError);
  CHECK_THROWS_AS(make_grating(0, 0, 0.5e-9, 1e-9), ConfigError);
}

TEST_CASE("ApertureSet ordering, overlap rejection and membership")
{
  const ApertureSet s({{5e-9, 2e-9, ApertureGroup::B}, {0, 2e-9, ApertureGroup::A}});
  CHECK(s[0].center == 0);
  CHECK(s[1].group == ApertureGroup::B);
  CHECK_THROWS_AS(ApertureSet({{0, 2e-9}, {1.5e-9, 2e-9}}), ConfigError);
  CHECK_THROWS_AS(ApertureSet({{0, 2e-9}, {2e-9, 2e-9}}), ConfigError); // touching
  CHECK_THROWS_AS(ApertureSet({{0, 0}}), ConfigError);
  // the union query agrees with asking every aperture
  for (double x = -3e-9; x <= 8e-9; x += 0.137e-9) {
    bool any = false;
    for (const Aperture& a : s)
      any = any || a.contains(x);
    CHECK(s.contains(x) == any);
  }
  CHECK(s.find(5e-9) == 1);
  CHECK(s.open_width() == rel_approx(4e-9));
  CHECK(s.filtered(ApertureGroup::A).size() == 1);
  CHECK_THROWS_AS(s.merged(ApertureSet({{0.5e-9, 1e-9}})), ConfigError);
}

TEST_CASE("transmits in both modes")
{
  const ParticleSpecies c60;
  const Aperture narrow{150e-9, 0.5e-9, ApertureGroup::B};
  const Aperture wide{0, 50e-9, ApertureGroup::A};
  for (auto mode : {TransmissionMode::CenterInAperture, TransmissionMode::HardSphereMargin}) {
    CHECK_FALSE(transmits(narrow, c60, 150e-9, mode));
    CHECK(transmits(wide, c60, 0, mode));
  }
  // hard-sphere margin excludes centers within d/2 of an edge
  CHECK_FALSE(transmits(wide, c60, 24.8e-9, TransmissionMode::HardSphereMargin));
  CHECK(transmits(wide, c60, 24.8e-9, TransmissionMode::CenterInAperture));
  const ParticleSpecies point = species_preset("point");
  CHECK(transmits(narrow, point, 150.24e-9, TransmissionMode::HardSphereMargin));
  // shrinking the diameter never turns a pass into a block
  for (double d : {2e-9, 1e-9, 0.4e-9, 0.0}) {
    ParticleSpecies s = c60;
    s.diameter = d;
    ParticleSpecies smaller = s;
    smaller.diameter = 0.5 * d;
    for (double x : {149.8e-9, 150e-9})
      for (auto mode : {TransmissionMode::CenterInAperture, TransmissionMode::HardSphereMargin})
        if (transmits(narrow, s, x, mode))
          CHECK(transmits(narrow, smaller, x, mode));
  }
  CHECK(transmission_mode_from_string(to_string(TransmissionMode::HardSphereMargin)) ==
        TransmissionMode::HardSphereMargin);
  CHECK_THROWS_AS(transmission_mode_from_string("sticky"), ConfigError);
}

TEST_CASE("gaussian_mass matches quadrature, including far tails")
{
  const double sigma = 2e-6;
  const auto rho = [&](double x) {
    return std::exp(-x * x / (2 * sigma * sigma)) / (std::sqrt(2 * std::numbers::pi) * sigma);
  };
  for (auto [a, b] : {std::pair{-1e-6, 3e-6}, {1e-6, 2e-6}, {-9e-6, -8e-6}, {7e-6, 7.5e-6}}) {
    const double ref = integrate_composite(rho, a, b, 8, 20);
    CHECK(gaussian_mass(a, b, sigma) == rel_approx(ref).epsilon(1e-12));
  }
}
