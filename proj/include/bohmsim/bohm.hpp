#pragma once

#include "bohmsim/core.hpp"
#include "bohmsim/propagator.hpp"

#include <span>
#include <string>
#include <vector>

namespace bohmsim {

/// The wavefunction is too close to a node for the guidance law to be trusted.
class SingularityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The adaptive integrator hit dt_min without meeting its tolerance.
class StepUnderflow : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Fate { TransmittedA, TransmittedB, BlockedPlate, BlockedBySize, AbortedSingularity };

std::string to_string(Fate fate);
Fate fate_from_string(const std::string& s);
inline bool is_transmitted(Fate f) { return f == Fate::TransmittedA || f == Fate::TransmittedB; }

struct TrajectoryState {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
};

struct Trajectory {
  std::size_t id = 0;
  double x0 = 0.0;
  double weight = 1.0;
  std::vector<TrajectoryState> samples; // strictly increasing t
  Fate fate = Fate::BlockedPlate;
  std::string abort_reason;
  std::size_t steps = 0; // accepted post-slit steps

  double final_x() const { return samples.back().x; }
  double final_t() const { return samples.back().t; }
};

/// How the first instants behind the slit plane are handled.
///  Bridge: each particle is placed at t1 + tau_b by conservation of the mass
///          to its left (exact for 1-D Bohmian flow) and integrated from there.
///  Direct: integration starts at t1 + dt_min (very slow for sharp apertures).
enum class NearField { Bridge, Direct };

std::string to_string(NearField mode);
NearField near_field_from_string(const std::string& s);

struct IntegratorConfig {
  double dt_min = 1e-13;      // s
  double dt_max = 1e-4;       // s
  double rel_tol = 1e-9;
  double abs_tol = 1e-13;     // m, floor of the error scale near x = 0
  double rho_floor = 1e-12;   // relative to WaveField::reference_density
  double v_cap = 1e3;         // m/s
  double max_displacement = 120e-6 / 1023; // m per step (one central-zoom cell)
  double max_relative_step = 0.3; // dt <= this * (t - t_start) also allowed
  NearField near_field = NearField::Bridge;
  /// tau_b is where the Fresnel length sqrt(2 hbar tau / m) reaches this
  /// multiple of the widest aperture ...
  double bridge_fresnel_ratio = 1.0;
  /// ... but at most this fraction of t2 - t1.
  double bridge_max_fraction = 0.01;
  /// Half-width of the resolved mass table, in units of the diffraction
  /// spread h tau_b / (m w_min) of the narrowest aperture.
  double bridge_extent = 20.0;
  int record_points = 80;     // log-spaced record times after the slit plane
  double record_first = 1e-9; // s after t1 of the first record time

  void validate() const;
};

/// Guidance velocity (hbar/m) Im(psi'/psi). Throws SingularityError below the
/// density floor.
double velocity(double x, double t, const WaveField& field, const IntegratorConfig& icfg);

/// Variant with an explicit prefactor on hbar/m; 0.5 reproduces the halved
/// guidance law some texts print, used only to show it breaks equivariance.
double velocity_scaled(double x, double t, const WaveField& field, const IntegratorConfig& icfg,
                       double factor);

/// Exact Bohmian motion in the freely spreading packet: x0 sigma(t)/sigma0.
double preslit_position(double x0, double t, const BeamConfig& beam,
                        const ParticleSpecies& species, const PhysicalConstants& consts);

/// Slit-plane outcome for a particle crossing at x_t1. `filter_size` false
/// treats every aperture as passable (point-particle reading).
Fate classify_at_slits(double x_t1, const ApertureSet& apertures, const ParticleSpecies& species,
                       TransmissionMode mode, bool filter_size = true);

/// Result of one adaptive integration.
struct IntegrationResult {
  std::vector<TrajectoryState> samples; // at the requested record times, then t_end
  bool ok = true;
  std::string error;
  std::size_t steps = 0;
  std::size_t rejected = 0;
};

/// Adaptive Dormand-Prince 5(4) on dx/dt = factor * v(x, t) from (t_start, x_start)
/// to t_end. Record times in (t_start, t_end) are filled by dense output.
IntegrationResult integrate_guidance(double x_start, double t_start, double t_end,
                                     const WaveField& field, const IntegratorConfig& icfg,
                                     std::span<const double> record_times,
                                     double factor = 1.0);

/// Log-spaced record times between t_first and t2 (t2 excluded), with
/// t_first = t1 + max(record_first, t_start - t1).
std::vector<double> post_slit_record_times(double t1, double t_start, double t2,
                                           const IntegratorConfig& icfg);

/// Cumulative density at t1 + tau_b, tabulated once per field, mapping the
/// slit-plane mass coordinate of a particle to its position at t1 + tau_b.
///
/// In one dimension the probability to the left of a Bohmian particle is
/// conserved, so the map is exact up to the table's quadrature error. The
/// table is resolved out to a finite half-width; beyond it the density is
/// modelled as C / (x - x_c)^2, with C fitted to the outer resolved band and
/// the two tails rescaled so the total matches the transmitted fraction.
class NearFieldBridge {
public:
  NearFieldBridge(const WaveField& field, double t2, const IntegratorConfig& icfg);

  double time() const { return t_bridge_; }
  /// Mass of |psi(., t1)|^2 on F to the left of x_t1.
  double slit_plane_mass(double x_t1) const;
  /// Position at time() with mass q to its left, q in [0, total_mass()].
  double position(double q) const;
  double total_mass() const { return total_; }
  /// total_mass minus (resolved mass + fitted tails) before rescaling.
  double unitarity_defect() const { return defect_; }
  double tail_mass_left() const { return tail_left_; }
  double tail_mass_right() const { return tail_right_; }
  std::size_t panels() const { return edges_.size() - 1; }

private:
  double integrate(double a, double b) const;
  double rho(double x) const;

  WaveField field_;
  double t_bridge_ = 0.0;
  double center_ = 0.0;
  std::vector<double> aperture_mass_before_; // per aperture, F order
  std::vector<double> edges_;                // panel edges
  std::vector<double> cumulative_;           // mass left of each edge
  double tail_left_ = 0.0, tail_right_ = 0.0;
  double c_left_ = 0.0, c_right_ = 0.0;      // tail coefficients
  double total_ = 0.0;
  double defect_ = 0.0;
};

/// Post-slit tail (t1, t2] for a transmitted particle. In Bridge mode the
/// particle is placed by `bridge` (built on the fly when null) and record
/// times start at the bridge time.
IntegrationResult integrate_post_slit(double x_t1, double t1, double t2, const WaveField& field,
                                      const IntegratorConfig& icfg,
                                      const NearFieldBridge* bridge = nullptr);

} // namespace bohmsim
