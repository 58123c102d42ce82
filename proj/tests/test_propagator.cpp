#include <doctest.h>

#include "approx.hpp"

#include "bohmsim/faddeeva.hpp"
#include "bohmsim/propagator.hpp"
#include "bohmsim/quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>

using namespace bohmsim;
using bohmsim::testing::rel_approx;

namespace {

const ParticleSpecies kC60;
const PhysicalConstants kConsts;
const BeamConfig kBeam;
constexpr double kT1 = 5e-3;
constexpr double kT2 = 11.25e-3;

ApertureSet full_grating()
{
  return ApertureSet({{0, 50e-9, ApertureGroup::A}})
      .merged(make_grating(150e-9, 100, 0.5e-9, 1e-9));
}

PropagationContext make_ctx(ApertureSet aps) { return {kC60, kConsts, kBeam, kT1, std::move(aps)}; }

double rel_l2(const std::vector<Complex>& a, const std::vector<Complex>& b)
{
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

} // namespace

TEST_CASE("faddeeva_w against high-precision references")
{
  // {Re z, Im z, Re w, Im w} computed with 30-digit arithmetic
  const std::array<std::array<double, 4>, 8> ref{{
      {0.5, 0.5, 0.53315670791217491377, 0.23048823138445840871},
      {3.0, 0.1, 0.0079426809987699907004, 0.20074234309867737198},
      {0.1, 4.0, 0.1369248403109600421, 0.0032366702261633094751},
      {10, 10, 0.02827946745423245666, 0.028138433276336895631},
      {-2, 1, 0.1402395813662779437, -0.22221344017989910261},
      {0.001, 0.001, 0.99887162233541124713, 0.0011263806715998664529},
      {6.3, 0.01, 0.000147893038913394244, 0.090727415163492762421},
      {30, 2, 0.0012502716123336107431, 0.018733294380844757945},
  }};
  for (const auto& r : ref) {
    const Complex expected(r[2], r[3]);
    const FaddeevaResult w = faddeeva_w({r[0], r[1]});
    CHECK(std::abs(w.value - expected) / std::abs(expected) < 1e-13);
    CHECK(w.rel_error < 1e-12);
  }
  CHECK(std::abs(faddeeva_w({0, 0}).value - 1.0) < 1e-14);
  CHECK(std::isinf(faddeeva_w({1, -1}).rel_error));
}

TEST_CASE("erf_complex reduces to std::erf on the real axis")
{
  for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9})
    CHECK(std::abs(erf_complex({x, 0}) - Complex(std::erf(x), 0)) < 1e-14);
}

TEST_CASE("kernel modulus and phase")
{
  const double dt = 1e-3;
  const Complex k = kernel(0, kT1 + dt, 0, kT1, kC60, kConsts);
  const double expected_mod = std::sqrt(kC60.mass / (2 * std::numbers::pi * kConsts.hbar * dt));
  CHECK(std::abs(k) == rel_approx(expected_mod).epsilon(1e-12));
  CHECK(std::arg(k) == rel_approx(-std::numbers::pi / 4).epsilon(1e-12));
  // depends on x - x_f only
  const Complex a = kernel(3e-6, kT1 + dt, 1e-6, kT1, kC60, kConsts);
  const Complex b = kernel(2e-6, kT1 + dt, 0, kT1, kC60, kConsts);
  CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
}

TEST_CASE("beta at the screen")
{
  const PropagationContext ctx = make_ctx(full_grating());
  CHECK(ctx.beta(kT2) == rel_approx(9.103e11).epsilon(1e-3));
  CHECK_THROWS_AS(ctx.beta(kT1), ConfigError);
  CHECK(ctx.runs().size() == 2);
}

TEST_CASE("a wide aperture leaves the free packet unchanged")
{
  const double s1 = sigma_t(kT1, kBeam, kC60, kConsts);
  const PropagationContext ctx = make_ctx(ApertureSet({{0, 16 * s1, ApertureGroup::A}}));
  const double s2 = sigma_t(kT2, kBeam, kC60, kConsts);
  std::vector<Complex> got, want;
  for (int i = 0; i <= 60; ++i) {
    const double x = -3 * s2 + 6 * s2 * i / 60.0;
    got.push_back(psi_after_closed(x, kT2, ctx));
    want.push_back(psi_free(x, kT2, kBeam, kC60, kConsts));
  }
  CHECK(rel_l2(got, want) < 1e-8);
}

TEST_CASE("closed form agrees with direct quadrature on the full layout")
{
  const PropagationContext ctx = make_ctx(full_grating());
  std::vector<Complex> closed, sampled, quad;
  for (int i = 0; i < 64; ++i) {
    const double x = -5e-3 + 10e-3 * (i + 0.37) / 64.0;
    closed.push_back(psi_after_closed(x, kT2, ctx));
    sampled.push_back(sample_after(x, kT2, ctx).psi);
    quad.push_back(psi_after_quadrature(x, kT2, ctx));
  }
  CHECK(rel_l2(closed, quad) < 1e-8);
  CHECK(rel_l2(sampled, quad) < 1e-8);
}

TEST_CASE("narrow-aperture series agrees with the error-function form")
{
  const PropagationContext ctx = make_ctx(full_grating());
  for (double t : {kT1 + 1e-6, kT1 + 1e-4, kT2}) {
    std::vector<Complex> a, b;
    for (int i = 0; i < 41; ++i) {
      const double x = -2e-4 + 4e-4 * i / 40.0;
      a.push_back(sample_after(x, t, ctx, ApertureFormula::Auto).psi);
      b.push_back(sample_after(x, t, ctx, ApertureFormula::ErrorFunction).psi);
    }
    CHECK(rel_l2(a, b) < 1e-9);
  }
}

TEST_CASE("single 50 nm slit: first minima of the far-field pattern")
{
  const PropagationContext ctx = make_ctx(ApertureSet({{0, 50e-9, ApertureGroup::A}}));
  // Fraunhofer minimum at lambda L / w
  const double lambda = de_broglie_wavelength(kC60, kBeam.v_y);
  const double expected = lambda * 1.25 / 50e-9;
  double best_x = 0, best_rho = 1e300;
  for (int i = 0; i <= 2000; ++i) {
    const double x = 0.5 * expected + expected * i / 2000.0;
    const double r = std::norm(psi_after_closed(x, kT2, ctx));
    if (r < best_rho) {
      best_rho = r;
      best_x = x;
    }
  }
  CHECK(best_x == rel_approx(expected).epsilon(0.02));
  CHECK(best_rho < 1e-3 * std::norm(psi_after_closed(0, kT2, ctx)));
}

TEST_CASE("gradient matches a five-point difference")
{
  const PropagationContext ctx = make_ctx(full_grating());
  for (double x : {-3.1e-3, -1e-4, 2.3e-5, 1.7e-3}) {
    const WaveSample s = sample_after(x, kT2, ctx);
    const double kappa = std::abs(s.dpsi_dx) / std::abs(s.psi);
    const double h = 0.05 / kappa;
    const auto f = [&](double y) { return psi_after_closed(y, kT2, ctx); };
    const Complex fd = (f(x - 2 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2 * h)) / (12 * h);
    CHECK(std::abs(fd - s.dpsi_dx) / std::abs(s.dpsi_dx) < 1e-6);
    CHECK(std::abs(grad_psi_after(x, kT2, ctx) - s.dpsi_dx) < 1e-10 * std::abs(s.dpsi_dx));
    CHECK(s.rho == rel_approx(std::norm(s.psi)).epsilon(1e-14));
  }
}

TEST_CASE("transmitted fraction")
{
  const PropagationContext full = make_ctx(full_grating());
  CHECK(transmitted_fraction(full) == rel_approx(1.99e-2).epsilon(2e-3));
  // independent sum of per-aperture quadratures
  double ref = 0;
  for (const Aperture& a : full.apertures())
    ref += integrate_composite(
        [](double x) { return std::norm(psi_free(x, kT1, kBeam, kC60, kConsts)); }, a.left(),
        a.right(), 1, 20);
  CHECK(transmitted_fraction(full) == rel_approx(ref).epsilon(1e-12));

  const double s1 = sigma_t(kT1, kBeam, kC60, kConsts);
  const PropagationContext wide = make_ctx(ApertureSet({{0, 20 * s1}}));
  CHECK(transmitted_fraction(wide) == rel_approx(1.0).epsilon(1e-12));

  // the beam is almost flat over 150 nm, so halving every width halves the flux
  std::vector<Aperture> halved;
  for (const Aperture& a : full.apertures())
    halved.push_back({a.center, 0.5 * a.width, a.group});
  const PropagationContext half = make_ctx(ApertureSet(halved));
  CHECK(transmitted_fraction(half) / transmitted_fraction(full) == rel_approx(0.5).epsilon(1e-3));
}

TEST_CASE("parity of the field for a mirror-symmetric layout")
{
  const PropagationContext ctx =
      make_ctx(ApertureSet({{-100e-9, 40e-9, ApertureGroup::A}, {100e-9, 40e-9, ApertureGroup::B}}));
  for (double x : {1e-6, 4e-5, 1.3e-3}) {
    const Complex a = psi_after_closed(x, kT2, ctx);
    const Complex b = psi_after_closed(-x, kT2, ctx);
    CHECK(std::abs(a - b) < 1e-10 * std::abs(a));
  }
}

TEST_CASE("WaveField dispatches between free and slit fields")
{
  const WaveField free = WaveField::free(kC60, kConsts, kBeam);
  CHECK_FALSE(free.has_slits());
  CHECK(std::abs(free.evaluate(1e-6, kT2).psi - psi_free(1e-6, kT2, kBeam, kC60, kConsts)) == 0.0);
  CHECK(free.reference_density(0) == rel_approx(std::norm(psi0(0, kBeam))));
  const WaveField slit = WaveField::slits(make_ctx(full_grating()));
  CHECK(slit.has_slits());
  const WaveSample s = slit.evaluate(1e-4, kT2);
  CHECK(std::abs(s.psi - psi_after_closed(1e-4, kT2, slit.context())) < 1e-10 * std::abs(s.psi));
}
