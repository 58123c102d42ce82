#pragma once

#include "bohmsim/core.hpp"

#include <optional>
#include <vector>

namespace bohmsim {

/// Consecutive apertures of equal width on a constant pitch (a grating, or a
/// single slit when count == 1).
struct ApertureRun {
  std::size_t first = 0;
  std::size_t count = 0;
  double first_center = 0.0;
  double pitch = 0.0;
  double width = 0.0;
};

/// Everything needed to evaluate the wavefunction behind the slit plane.
///
/// The field at t1 is the free Gaussian psi_free(., t1) = norm1 exp(-alpha x^2)
/// cut to the aperture set; for t > t1 it is the free-kernel propagation of
/// that cut field. Immutable once built.
class PropagationContext {
public:
  PropagationContext(ParticleSpecies species, PhysicalConstants consts, BeamConfig beam,
                     double t1, ApertureSet apertures);

  const ParticleSpecies& species() const { return species_; }
  const PhysicalConstants& consts() const { return consts_; }
  const BeamConfig& beam() const { return beam_; }
  const ApertureSet& apertures() const { return apertures_; }
  double t1() const { return t1_; }

  /// Gaussian inverse variance 1 / (4 sigma0 s(t1)).
  Complex alpha() const { return alpha_; }
  /// (2 pi s(t1)^2)^(-1/4).
  Complex norm1() const { return norm1_; }
  /// Kernel phase rate m / (2 hbar (t - t1)); throws ConfigError for t <= t1.
  double beta(double t) const;

  /// The aperture set split into maximal uniform runs.
  const std::vector<ApertureRun>& runs() const { return runs_; }

private:
  ParticleSpecies species_;
  PhysicalConstants consts_;
  BeamConfig beam_;
  double t1_;
  ApertureSet apertures_;
  Complex alpha_;
  Complex norm1_;
  std::vector<ApertureRun> runs_;
};

struct WaveSample {
  double x = 0.0;
  Complex psi;
  Complex dpsi_dx;
  double rho = 0.0;
};

/// Free-particle kernel K(x, t; x_f, t1), principal square-root branch.
Complex kernel(double x, double t, double x_f, double t1, const ParticleSpecies& species,
               const PhysicalConstants& consts);

/// Gauss-Legendre node count used for one aperture at (x, t).
int quadrature_nodes(double x, double t, const PropagationContext& ctx, const Aperture& ap);

/// Direct numerical evaluation of the aperture integral. `refine` multiplies
/// the node budget (used to check convergence).
Complex psi_after_quadrature(double x, double t, const PropagationContext& ctx, int refine = 1);

/// Closed form of the aperture integral in terms of the Faddeeva function.
Complex psi_after_closed(double x, double t, const PropagationContext& ctx);

Complex grad_psi_after(double x, double t, const PropagationContext& ctx);

/// How sample_after evaluates each aperture integral. Auto uses a power
/// series in the kernel curvature for apertures much narrower than the
/// Fresnel length and the error-function form otherwise; ErrorFunction forces
/// the latter everywhere (kept for cross-checks).
enum class ApertureFormula { Auto, ErrorFunction };

/// psi, d psi/dx and rho from a single closed-form pass.
WaveSample sample_after(double x, double t, const PropagationContext& ctx,
                        ApertureFormula formula = ApertureFormula::Auto);

/// Probability flux entering the apertures at t1: integral of |psi_free(., t1)|^2 over F.
double transmitted_fraction(const PropagationContext& ctx);

/// psi, d psi/dx and rho at any (x, t). Either a freely spreading packet with
/// no slit plane, or a packet cut by an aperture set at t1.
class WaveField {
public:
  static WaveField free(ParticleSpecies species, PhysicalConstants consts, BeamConfig beam);
  static WaveField slits(PropagationContext ctx);

  WaveSample evaluate(double x, double t) const;

  const ParticleSpecies& species() const { return species_; }
  const PhysicalConstants& consts() const { return consts_; }
  const BeamConfig& beam() const { return beam_; }
  bool has_slits() const { return ctx_.has_value(); }
  const PropagationContext& context() const { return *ctx_; }

  /// Density scale for the node floor: the packet peak at t for a free
  /// field, the largest slit-plane density inside F otherwise.
  double reference_density(double t) const;

private:
  WaveField(ParticleSpecies species, PhysicalConstants consts, BeamConfig beam,
            std::optional<PropagationContext> ctx);

  ParticleSpecies species_;
  PhysicalConstants consts_;
  BeamConfig beam_;
  std::optional<PropagationContext> ctx_;
  double slit_plane_peak_ = 0.0;
};

} // namespace bohmsim
