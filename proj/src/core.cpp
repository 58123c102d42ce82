#include "bohmsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bohmsim {

namespace {

void require(bool ok, const std::string& what)
{
  if (!ok)
    throw ConfigError(what);
}

} // namespace

void PhysicalConstants::validate() const
{
  require(hbar > 0 && h > 0, "physical constants must be positive");
  require(std::abs(h - 2 * std::numbers::pi * hbar) / h < 1e-12,
          "h and hbar are inconsistent (h != 2 pi hbar)");
}

void ParticleSpecies::validate() const
{
  require(std::isfinite(mass) && mass > 0, "species mass must be > 0");
  require(std::isfinite(diameter) && diameter >= 0, "species diameter must be >= 0");
}

ParticleSpecies species_preset(const std::string& name)
{
  if (name == "C60")
    return {"C60", 1.2e-24, 1e-9};
  if (name == "point")
    return {"point", 1.2e-24, 0.0};
  if (name == "Rb-Rydberg50")
    return {"Rb-Rydberg50", 1.4192e-25, 1e-6};
  throw ConfigError("unknown species preset '" + name + "' (valid: C60, point, Rb-Rydberg50)");
}

void BeamConfig::validate() const
{
  require(std::isfinite(sigma0) && sigma0 > 0, "beam sigma0 must be > 0");
  require(std::isfinite(v_y) && v_y > 0, "beam v_y must be > 0");
  require(std::isfinite(v_y_spread) && v_y_spread >= 0, "beam v_y_spread must be >= 0");
}

void GeometryConfig::validate() const
{
  require(std::isfinite(d1) && d1 > 0, "geometry d1 must be > 0");
  require(std::isfinite(d2) && d2 > 0, "geometry d2 must be > 0");
}

// ApertureSet ----------------------------------------------------------------

ApertureSet::ApertureSet(std::vector<Aperture> apertures) : apertures_(std::move(apertures))
{
  for (const auto& ap : apertures_)
    require(std::isfinite(ap.center) && std::isfinite(ap.width) && ap.width > 0,
            "aperture width must be > 0");
  std::sort(apertures_.begin(), apertures_.end(),
            [](const Aperture& a, const Aperture& b) { return a.center < b.center; });
  for (std::size_t i = 1; i < apertures_.size(); ++i)
    require(apertures_[i - 1].right() < apertures_[i].left(),
            "apertures overlap near x = " + std::to_string(apertures_[i].center));
}

long ApertureSet::find(double x) const
{
  // first aperture whose right edge is >= x
  auto it = std::lower_bound(apertures_.begin(), apertures_.end(), x,
                             [](const Aperture& a, double v) { return a.right() < v; });
  if (it != apertures_.end() && it->contains(x))
    return static_cast<long>(it - apertures_.begin());
  return -1;
}

double ApertureSet::open_width() const
{
  double w = 0;
  for (const auto& ap : apertures_)
    w += ap.width;
  return w;
}

ApertureSet ApertureSet::merged(const ApertureSet& other) const
{
  std::vector<Aperture> all = apertures_;
  all.insert(all.end(), other.apertures_.begin(), other.apertures_.end());
  return ApertureSet(std::move(all));
}

ApertureSet ApertureSet::filtered(ApertureGroup group) const
{
  std::vector<Aperture> out;
  std::copy_if(apertures_.begin(), apertures_.end(), std::back_inserter(out),
               [group](const Aperture& a) { return a.group == group; });
  return ApertureSet(std::move(out));
}

ApertureSet make_grating(double center, int n_slits, double width, double period,
                         ApertureGroup group)
{
  require(n_slits >= 1, "grating needs at least one slit");
  require(width > 0, "grating slit width must be > 0");
  require(n_slits == 1 || width < period, "grating slit width must be smaller than the period");
  std::vector<Aperture> aps;
  aps.reserve(static_cast<std::size_t>(n_slits));
  const double first = center - 0.5 * (n_slits - 1) * period;
  for (int k = 0; k < n_slits; ++k)
    aps.push_back({first + k * period, width, group});
  return ApertureSet(std::move(aps));
}

std::string to_string(TransmissionMode mode)
{
  return mode == TransmissionMode::CenterInAperture ? "center-in-aperture" : "hard-sphere-margin";
}

TransmissionMode transmission_mode_from_string(const std::string& s)
{
  if (s == "center-in-aperture")
    return TransmissionMode::CenterInAperture;
  if (s == "hard-sphere-margin")
    return TransmissionMode::HardSphereMargin;
  throw ConfigError("unknown transmission mode '" + s +
                    "' (valid: center-in-aperture, hard-sphere-margin)");
}

bool transmits(const Aperture& aperture, const ParticleSpecies& species, double x_hit,
               TransmissionMode mode)
{
  const double d = species.diameter;
  if (mode == TransmissionMode::CenterInAperture)
    return aperture.width > d;
  const double half = 0.5 * d;
  return x_hit >= aperture.left() + half && x_hit <= aperture.right() - half;
}

double gaussian_mass(double a, double b, double sigma)
{
  const double s = std::numbers::sqrt2 * sigma;
  if (a >= 0)
    return 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  if (b <= 0)
    return 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
  return 0.5 * (std::erf(b / s) - std::erf(a / s));
}

// Pre-slit wavefunction ------------------------------------------------------

Complex psi0(double x, const BeamConfig& beam)
{
  const double s2 = beam.sigma0 * beam.sigma0;
  return {std::pow(2 * std::numbers::pi * s2, -0.25) * std::exp(-x * x / (4 * s2)), 0.0};
}

Complex s_param(double t, const BeamConfig& beam, const ParticleSpecies& species,
                const PhysicalConstants& consts)
{
  const double s0 = beam.sigma0;
  return {s0, consts.hbar * t / (2 * species.mass * s0)};
}

double sigma_t(double t, const BeamConfig& beam, const ParticleSpecies& species,
               const PhysicalConstants& consts)
{
  const double r = consts.hbar * t / (2 * species.mass * beam.sigma0 * beam.sigma0);
  return beam.sigma0 * std::sqrt(1 + r * r);
}

Complex psi_free(double x, double t, const BeamConfig& beam, const ParticleSpecies& species,
                 const PhysicalConstants& consts)
{
  const Complex s = s_param(t, beam, species, consts);
  const Complex norm = std::pow(2 * std::numbers::pi * s * s, -0.25);
  return norm * std::exp(-x * x / (4 * beam.sigma0 * s));
}

Complex grad_psi_free(double x, double t, const BeamConfig& beam,
                      const ParticleSpecies& species, const PhysicalConstants& consts)
{
  const Complex s = s_param(t, beam, species, consts);
  return psi_free(x, t, beam, species, consts) * (-x / (2 * beam.sigma0 * s));
}

double de_broglie_wavelength(const ParticleSpecies& species, double v_y,
                             const PhysicalConstants& consts)
{
  require(v_y > 0, "v_y must be > 0");
  return consts.h / (species.mass * v_y);
}

} // namespace bohmsim
