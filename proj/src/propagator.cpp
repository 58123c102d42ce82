#include "bohmsim/propagator.hpp"

#include "bohmsim/faddeeva.hpp"
#include "bohmsim/quadrature.hpp"


#include <algorithm>
#include <array>
#include <utility>
#include <cmath>
#include <numbers>

namespace bohmsim {

namespace {

constexpr Complex I{0.0, 1.0};
constexpr double kFaddeevaTolerance = 1e-10;

// Time-dependent pieces of the closed form, shared by every aperture.
struct Frame {
  double beta;
  Complex a;        // alpha - i beta
  Complex sqrt_a;
  Complex alpha_over_a;
  Complex kernel_norm; // norm1 * sqrt(beta / (i pi))
};

Frame make_frame(const PropagationContext& ctx, double t)
{
  Frame f;
  f.beta = ctx.beta(t);
  f.a = ctx.alpha() - I * f.beta;
  f.sqrt_a = std::sqrt(f.a);
  f.alpha_over_a = ctx.alpha() / f.a;
  f.kernel_norm = ctx.norm1() * std::sqrt(Complex(f.beta, 0.0) / (I * std::numbers::pi));
  return f;
}

struct ComplexPair {
  Complex first, second;
  ComplexPair& operator+=(const ComplexPair& o)
  {
    first += o.first;
    second += o.second;
    return *this;
  }
  friend ComplexPair operator*(double s, const ComplexPair& p) { return {s * p.first, s * p.second}; }
  friend ComplexPair operator*(const ComplexPair& p, double s) { return s * p; }
};

struct ApertureTerms {
  Complex integral; // I0 = int_L^R exp(E(x_f)) dx_f
  Complex d_integral;
  bool ok = true;
};

// Integrand exponent E(x_f) = -alpha x_f^2 + i beta (x - x_f)^2.
Complex exponent(const PropagationContext& ctx, const Frame& f, double x, double xf)
{
  const double d = x - xf;
  return -ctx.alpha() * (xf * xf) + Complex(0.0, f.beta * d * d);
}

// Closed form: with a = alpha - i beta and z = sqrt(a) (x_f - x + x alpha/a),
//   I0 = sqrt(pi)/(2 sqrt(a)) exp(E0) [erf(z_R) - erf(z_L)],
// where exp(E0) erf(z) is rewritten edge by edge through
//   exp(E0) erfc(s z) = exp(E(x_edge)) w(i s z),  s = sign Re z,
// so that every factor stays bounded.
ApertureTerms aperture_closed(const PropagationContext& ctx, const Frame& f, double x,
                              Complex exp_e0, const Aperture& ap)
{
  const double edges[2] = {ap.left(), ap.right()};
  Complex edge_exp[2];
  Complex edge_term[2];
  double sign[2];
  ApertureTerms out;
  const Complex shift = x * f.alpha_over_a;
  for (int k = 0; k < 2; ++k) {
    const Complex z = f.sqrt_a * ((edges[k] - x) + shift);
    sign[k] = z.real() >= 0 ? 1.0 : -1.0;
    const FaddeevaResult w = faddeeva_w(I * (sign[k] * z));
    if (!(w.rel_error <= kFaddeevaTolerance))
      out.ok = false;
    edge_exp[k] = std::exp(exponent(ctx, f, x, edges[k]));
    edge_term[k] = edge_exp[k] * w.value;
  }
  // exp(E0) [erf(z_R) - erf(z_L)]
  const Complex bracket =
      (sign[1] - sign[0]) * exp_e0 - sign[1] * edge_term[1] + sign[0] * edge_term[0];
  out.integral = std::sqrt(std::numbers::pi) / (2.0 * f.sqrt_a) * bracket;
  out.d_integral = 2.0 * I * f.beta *
                   (x * f.alpha_over_a * out.integral + (edge_exp[1] - edge_exp[0]) / (2.0 * f.a));
  if (!std::isfinite(std::abs(out.integral)) || !std::isfinite(std::abs(out.d_integral)))
    out.ok = false;
  return out;
}

// Quadrature of I0 and dI0/dx over one aperture with the phase-span node budget.
ApertureTerms aperture_quadrature(const PropagationContext& ctx, const Frame& f, double x,
                                  double t, const Aperture& ap, int refine)
{
  const int nodes = quadrature_nodes(x, t, ctx, ap) * refine;
  const int panels = std::max(1, (nodes + 19) / 20);
  const auto integrand = [&](double xf) {
    const Complex e = std::exp(exponent(ctx, f, x, xf));
    return ComplexPair{e, Complex(0.0, 2.0 * f.beta * (x - xf)) * e};
  };
  const ComplexPair acc = integrate_composite(integrand, ap.left(), ap.right(), panels, 20);
  return {acc.first, acc.second, true};
}

// Narrow apertures ----------------------------------------------------------
//
// Around the aperture center c, with u = x_f - c and h = w/2,
//   E(c + u) = E(c) + g u + q u^2,  g = E'(c),  q = -alpha + i beta,
// so I0 = exp(E(c)) h J(G, Q) with G = g h, Q = q h^2 and
//   J(G, Q)  = int_{-1}^{1} exp(G s + Q s^2) ds,
//   J1(G, Q) = int_{-1}^{1} s exp(G s + Q s^2) ds,
//   dI0/dx   = 2 i beta exp(E(c)) h [(x - c) J - h J1].
// For |Q| small both are power series: in G for small |G|, or in Q over the
// moments mu_n(G) = int s^n exp(G s) ds, which obey an upward recurrence
// that is stable once |G| exceeds a few units.

constexpr double kNarrowMaxQ = 0.05;
constexpr double kSeriesMaxG = 2.0;
constexpr int kSeriesTerms = 15; // even (and odd) terms in G; enough for |G| <= 2
constexpr int kMaxQTerms = 10;
// Re-seed the exponential recurrences along a run this often.
constexpr std::size_t kReseedEvery = 64;

struct NarrowCoefficients {
  Complex q;  // -alpha + i beta
  Complex Q;  // q h^2
  double h;
  std::array<Complex, kSeriesTerms> even; // nu_{2j}(Q) / (2j)!
  std::array<Complex, kSeriesTerms> odd;  // nu_{2j+2}(Q) / (2j+1)!
  std::array<Complex, kMaxQTerms + 1> q_pow;   // Q^m / m!
  int q_terms = 0;
};

// nu_n(Q) = int_{-1}^{1} s^n exp(Q s^2) ds for even n.
Complex nu_even(int n, Complex Q)
{
  Complex sum = 0;
  Complex term = 1; // Q^m / m!
  for (int m = 0; m < 40; ++m) {
    const Complex add = term * (2.0 / (n + 2 * m + 1));
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum))
      break;
    term *= Q / static_cast<double>(m + 1);
  }
  return sum;
}

// Smallest |G|^2 for which j even terms are no longer enough:
// |G|^(2j) / (2j)! < 1e-17.
const std::array<double, kSeriesTerms + 1>& series_g2_bounds()
{
  static const auto table = [] {
    std::array<double, kSeriesTerms + 1> b{};
    double fact = 1.0;
    for (int j = 1; j <= kSeriesTerms; ++j) {
      fact *= (2.0 * j - 1) * (2.0 * j);
      b[static_cast<std::size_t>(j)] = std::pow(1e-17 * fact, 1.0 / j);
    }
    return b;
  }();
  return table;
}

NarrowCoefficients make_narrow(const PropagationContext& ctx, const Frame& f, double width)
{
  NarrowCoefficients nc;
  nc.h = 0.5 * width;
  nc.q = -ctx.alpha() + I * f.beta;
  nc.Q = nc.q * (nc.h * nc.h);
  // nu_n for even n <= 2 kSeriesTerms by the downward recurrence
  // nu_n = (2 e^Q - 2 Q nu_{n+2}) / (n + 1), seeded by a direct series.
  std::array<Complex, kSeriesTerms + 1> nu;
  nu[kSeriesTerms] = nu_even(2 * kSeriesTerms, nc.Q);
  const Complex two_eq = 2.0 * std::exp(nc.Q);
  for (int j = kSeriesTerms - 1; j >= 0; --j)
    nu[static_cast<std::size_t>(j)] =
        (two_eq - 2.0 * nc.Q * nu[static_cast<std::size_t>(j + 1)]) / (2.0 * j + 1);
  double fact_even = 1.0; // (2j)!
  for (int j = 0; j < kSeriesTerms; ++j) {
    if (j > 0)
      fact_even *= (2.0 * j - 1) * (2.0 * j);
    nc.even[static_cast<std::size_t>(j)] = nu[static_cast<std::size_t>(j)] / fact_even;
    nc.odd[static_cast<std::size_t>(j)] = nu[static_cast<std::size_t>(j + 1)] / (fact_even * (2.0 * j + 1));
  }
  Complex term = 1;
  const double qa = std::abs(nc.Q);
  double bound = 1;
  nc.q_terms = 0;
  for (int m = 0; m <= kMaxQTerms; ++m) {
    nc.q_pow[static_cast<std::size_t>(m)] = term;
    nc.q_terms = m + 1;
    bound *= qa / (m + 1);
    if (bound < 1e-17)
      break;
    term *= nc.Q / static_cast<double>(m + 1);
  }
  return nc;
}

// J and J1 for one aperture.
std::pair<Complex, Complex> narrow_integrals(const NarrowCoefficients& nc, Complex G)
{
  const double g2 = std::norm(G);
  if (g2 <= kSeriesMaxG * kSeriesMaxG) {
    int terms = 1;
    const auto& bounds = series_g2_bounds();
    while (terms < kSeriesTerms && bounds[static_cast<std::size_t>(terms)] < g2)
      ++terms;
    const Complex G2 = G * G;
    Complex je = nc.even[static_cast<std::size_t>(terms - 1)];
    Complex jo = nc.odd[static_cast<std::size_t>(terms - 1)];
    for (int j = terms - 2; j >= 0; --j) {
      je = je * G2 + nc.even[static_cast<std::size_t>(j)];
      jo = jo * G2 + nc.odd[static_cast<std::size_t>(j)];
    }
    return {je, G * jo};
  }
  // Upward recurrence mu_n = (e^G - (-1)^n e^-G)/G - (n/G) mu_{n-1}.
  const Complex ep = std::exp(G);
  const Complex em = 1.0 / ep;
  const Complex inv_g = 1.0 / G;
  const Complex diff = (ep - em) * inv_g;
  const Complex sum = (ep + em) * inv_g;
  Complex mu = diff; // mu_0
  Complex J = nc.q_pow[0] * mu;
  Complex J1 = 0;
  for (int n = 1; n <= 2 * nc.q_terms - 1; ++n) {
    mu = ((n % 2 == 0) ? diff : sum) - static_cast<double>(n) * inv_g * mu;
    const auto m = static_cast<std::size_t>(n / 2);
    if (n % 2 == 0)
      J += nc.q_pow[m] * mu;
    else
      J1 += nc.q_pow[m] * mu;
  }
  return {J, J1};
}

bool is_narrow(const Frame& f, const PropagationContext& ctx, double width)
{
  const double h = 0.5 * width;
  return std::abs(-ctx.alpha() + I * f.beta) * h * h <= kNarrowMaxQ;
}

// Sum of I0 and dI0/dx over a uniform run of narrow apertures. exp(E(c_k))
// follows the chirp recurrence E(c_{k+1}) - E(c_k) = g_k p + q p^2 with
// g_{k+1} = g_k + 2 q p.
ComplexPair narrow_run(const PropagationContext& ctx, const Frame& f, double x,
                       const NarrowCoefficients& nc, const ApertureRun& run)
{
  ComplexPair acc{0.0, 0.0};
  const double p = run.pitch;
  const Complex step_growth = std::exp(2.0 * nc.q * (p * p));
  Complex e_c, step;
  for (std::size_t k = 0; k < run.count; ++k) {
    const double c = run.first_center + static_cast<double>(k) * p;
    const Complex g = -2.0 * ctx.alpha() * c - 2.0 * I * f.beta * (x - c);
    if (k % kReseedEvery == 0) {
      e_c = std::exp(exponent(ctx, f, x, c));
      step = std::exp(g * p + nc.q * (p * p));
    } else {
      e_c *= step;
      step *= step_growth;
    }
    const auto [J, J1] = narrow_integrals(nc, g * nc.h);
    const Complex base = e_c * nc.h;
    acc.first += base * J;
    acc.second += base * ((x - c) * J - nc.h * J1);
  }
  acc.second *= 2.0 * I * f.beta;
  return acc;
}

} // namespace

PropagationContext::PropagationContext(ParticleSpecies species, PhysicalConstants consts,
                                       BeamConfig beam, double t1, ApertureSet apertures)
    : species_(std::move(species)), consts_(consts), beam_(beam), t1_(t1),
      apertures_(std::move(apertures))
{
  species_.validate();
  consts_.validate();
  beam_.validate();
  if (!(t1_ > 0))
    throw ConfigError("slit-plane time t1 must be > 0");
  if (apertures_.empty())
    throw ConfigError("propagation needs a nonempty aperture set");
  const Complex s1 = s_param(t1_, beam_, species_, consts_);
  alpha_ = 1.0 / (4.0 * beam_.sigma0 * s1);
  norm1_ = std::pow(2.0 * std::numbers::pi * s1 * s1, -0.25);

  const auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::abs(b); };
  for (std::size_t i = 0; i < apertures_.size(); ++i) {
    const Aperture& ap = apertures_[i];
    if (!runs_.empty()) {
      ApertureRun& r = runs_.back();
      const double pitch = ap.center - apertures_[i - 1].center;
      if (same(ap.width, r.width) && (r.count == 1 || same(pitch, r.pitch))) {
        r.pitch = pitch;
        ++r.count;
        continue;
      }
    }
    runs_.push_back({i, 1, ap.center, 0.0, ap.width});
  }
  // Snap each run's pitch to its end points so centers are reproduced evenly.
  for (auto& r : runs_)
    if (r.count > 1)
      r.pitch = (apertures_[r.first + r.count - 1].center - r.first_center) /
                static_cast<double>(r.count - 1);
}

double PropagationContext::beta(double t) const
{
  if (!(t > t1_))
    throw ConfigError("post-slit evaluation needs t > t1");
  return species_.mass / (2.0 * consts_.hbar * (t - t1_));
}

Complex kernel(double x, double t, double x_f, double t1, const ParticleSpecies& species,
               const PhysicalConstants& consts)
{
  if (!(t > t1))
    throw ConfigError("kernel needs t > t1");
  const double dt = t - t1;
  const double d = x - x_f;
  const Complex pref =
      std::sqrt(Complex(species.mass / (2.0 * std::numbers::pi * consts.hbar * dt), 0.0) / I);
  return pref * std::exp(Complex(0.0, species.mass * d * d / (2.0 * consts.hbar * dt)));
}

int quadrature_nodes(double x, double t, const PropagationContext& ctx, const Aperture& ap)
{
  const double beta = ctx.beta(t);
  const double w = ap.width;
  const double span = beta * (std::abs(2.0 * (x - ap.center)) * w + w * w);
  const double n = std::ceil(10.0 * span / (2.0 * std::numbers::pi));
  if (n > 1e8)
    throw NumericError("quadrature node budget exceeds 1e8 nodes");
  return std::max(16, static_cast<int>(n));
}

Complex psi_after_quadrature(double x, double t, const PropagationContext& ctx, int refine)
{
  const Frame f = make_frame(ctx, t);
  Complex sum = 0;
  for (const auto& ap : ctx.apertures())
    sum += aperture_quadrature(ctx, f, x, t, ap, refine).integral;
  return f.kernel_norm * sum;
}

WaveSample sample_after(double x, double t, const PropagationContext& ctx,
                        ApertureFormula formula)
{
  const Frame f = make_frame(ctx, t);
  const Complex exp_e0 = std::exp(Complex(0.0, f.beta) * f.alpha_over_a * (x * x));
  Complex sum = 0;
  Complex dsum = 0;
  for (const auto& run : ctx.runs()) {
    if (formula == ApertureFormula::Auto && is_narrow(f, ctx, run.width)) {
      const ComplexPair r = narrow_run(ctx, f, x, make_narrow(ctx, f, run.width), run);
      sum += r.first;
      dsum += r.second;
      continue;
    }
    for (std::size_t i = run.first; i < run.first + run.count; ++i) {
      const Aperture& ap = ctx.apertures()[i];
      ApertureTerms terms = aperture_closed(ctx, f, x, exp_e0, ap);
      if (!terms.ok)
        terms = aperture_quadrature(ctx, f, x, t, ap, 1);
      sum += terms.integral;
      dsum += terms.d_integral;
    }
  }
  WaveSample s;
  s.x = x;
  s.psi = f.kernel_norm * sum;
  s.dpsi_dx = f.kernel_norm * dsum;
  s.rho = std::norm(s.psi);
  return s;
}

Complex psi_after_closed(double x, double t, const PropagationContext& ctx)
{
  return sample_after(x, t, ctx).psi;
}

Complex grad_psi_after(double x, double t, const PropagationContext& ctx)
{
  return sample_after(x, t, ctx).dpsi_dx;
}

double transmitted_fraction(const PropagationContext& ctx)
{
  const double sigma1 = sigma_t(ctx.t1(), ctx.beam(), ctx.species(), ctx.consts());
  double total = 0;
  for (const auto& ap : ctx.apertures())
    total += gaussian_mass(ap.left(), ap.right(), sigma1);
  return std::min(total, 1.0);
}

// WaveField -------------------------------------------------------------------

WaveField::WaveField(ParticleSpecies species, PhysicalConstants consts, BeamConfig beam,
                     std::optional<PropagationContext> ctx)
    : species_(std::move(species)), consts_(consts), beam_(beam), ctx_(std::move(ctx))
{
  if (ctx_) {
    const double t1 = ctx_->t1();
    for (const auto& ap : ctx_->apertures()) {
      const double closest = std::clamp(0.0, ap.left(), ap.right());
      slit_plane_peak_ = std::max(slit_plane_peak_,
                                  std::norm(psi_free(closest, t1, beam_, species_, consts_)));
    }
  }
}

WaveField WaveField::free(ParticleSpecies species, PhysicalConstants consts, BeamConfig beam)
{
  species.validate();
  consts.validate();
  beam.validate();
  return WaveField(std::move(species), consts, beam, std::nullopt);
}

WaveField WaveField::slits(PropagationContext ctx)
{
  auto species = ctx.species();
  auto consts = ctx.consts();
  auto beam = ctx.beam();
  return WaveField(std::move(species), consts, beam, std::move(ctx));
}

WaveSample WaveField::evaluate(double x, double t) const
{
  if (ctx_ && t > ctx_->t1())
    return sample_after(x, t, *ctx_);
  WaveSample s;
  s.x = x;
  s.psi = psi_free(x, t, beam_, species_, consts_);
  s.dpsi_dx = s.psi * (-x / (2.0 * beam_.sigma0 * s_param(t, beam_, species_, consts_)));
  s.rho = std::norm(s.psi);
  return s;
}

double WaveField::reference_density(double t) const
{
  if (ctx_ && t > ctx_->t1())
    return slit_plane_peak_;
  const double sig = sigma_t(t, beam_, species_, consts_);
  return 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sig);
}

} // namespace bohmsim
