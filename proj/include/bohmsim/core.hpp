#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace bohmsim {

using Complex = std::complex<double>;

/// Raised when a configuration value or a precondition on inputs is violated.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot reach its accuracy target.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// h is the exact SI value; hbar is derived as h / (2 pi) so the two agree
/// to rounding (the truncated CODATA decimal 1.054571817e-34 is off by 6e-10).
struct PhysicalConstants {
  double h = 6.62607015e-34;                          // J s
  double hbar = 6.62607015e-34 / (2 * std::numbers::pi); // J s

  void validate() const;
};

struct ParticleSpecies {
  std::string name = "C60";
  double mass = 1.2e-24;   // kg
  double diameter = 1e-9;  // m

  void validate() const;
};

/// Built-in species. "C60" is the fullerene default, "Rb-Rydberg50" carries
/// parameters only; its effective diameter is the 1 um slit width known to stop
/// n = 50 Rydberg atoms.
ParticleSpecies species_preset(const std::string& name);

struct BeamConfig {
  double sigma0 = 2e-6;      // m, initial packet width
  double v_y = 200.0;        // m/s
  double v_y_spread = 0.0;   // m/s, standard deviation

  void validate() const;
};

struct GeometryConfig {
  double d1 = 1.0;   // source to slit plane, m
  double d2 = 1.25;  // slit plane to screen, m

  void validate() const;
  double t1(double v_y) const { return d1 / v_y; }
  double t2(double v_y) const { return (d1 + d2) / v_y; }
};

/// Which slit group an aperture belongs to; decides the TransmittedA /
/// TransmittedB fate of trajectories crossing it.
enum class ApertureGroup { A, B };

struct Aperture {
  double center = 0.0;
  double width = 0.0;
  ApertureGroup group = ApertureGroup::A;

  double left() const { return center - 0.5 * width; }
  double right() const { return center + 0.5 * width; }
  bool contains(double x) const { return x >= left() && x <= right(); }
};

/// Sorted, pairwise disjoint union of slit intervals on the slit plane.
class ApertureSet {
public:
  ApertureSet() = default;
  /// Sorts by center and rejects any overlapping (or touching) pair.
  explicit ApertureSet(std::vector<Aperture> apertures);

  const std::vector<Aperture>& apertures() const { return apertures_; }
  bool empty() const { return apertures_.empty(); }
  std::size_t size() const { return apertures_.size(); }
  const Aperture& operator[](std::size_t i) const { return apertures_[i]; }
  auto begin() const { return apertures_.begin(); }
  auto end() const { return apertures_.end(); }

  /// Index of the aperture containing x, or -1.
  long find(double x) const;
  bool contains(double x) const { return find(x) >= 0; }
  double open_width() const;

  /// Union with another set; throws ConfigError on overlap.
  ApertureSet merged(const ApertureSet& other) const;
  ApertureSet filtered(ApertureGroup group) const;

private:
  std::vector<Aperture> apertures_;
};

ApertureSet make_grating(double center, int n_slits, double width, double period,
                         ApertureGroup group = ApertureGroup::B);

enum class TransmissionMode { CenterInAperture, HardSphereMargin };

std::string to_string(TransmissionMode mode);
TransmissionMode transmission_mode_from_string(const std::string& s);

/// Whether a particle whose center crosses the slit plane at x_hit (inside
/// the aperture) gets through it.
bool transmits(const Aperture& aperture, const ParticleSpecies& species, double x_hit,
               TransmissionMode mode);

// Pre-slit wavefunction ------------------------------------------------------

Complex psi0(double x, const BeamConfig& beam);

/// Complex width s(t) = sigma0 (1 + i hbar t / (2 m sigma0^2)).
Complex s_param(double t, const BeamConfig& beam, const ParticleSpecies& species,
                const PhysicalConstants& consts);

/// Real packet width |s(t)|.
double sigma_t(double t, const BeamConfig& beam, const ParticleSpecies& species,
               const PhysicalConstants& consts);

/// Freely spreading Gaussian packet, valid for every t >= 0.
Complex psi_free(double x, double t, const BeamConfig& beam, const ParticleSpecies& species,
                 const PhysicalConstants& consts);

/// d psi_free / dx.
Complex grad_psi_free(double x, double t, const BeamConfig& beam,
                      const ParticleSpecies& species, const PhysicalConstants& consts);

/// Mass of N(0, sigma^2) on [a, b], in the erf or erfc form that avoids
/// cancellation for intervals away from the origin.
double gaussian_mass(double a, double b, double sigma);

double de_broglie_wavelength(const ParticleSpecies& species, double v_y,
                             const PhysicalConstants& consts = {});

} // namespace bohmsim
