#include "bohmsim/bohm.hpp"

#include "bohmsim/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

namespace bohmsim {

std::string to_string(Fate fate)
{
  switch (fate) {
  case Fate::TransmittedA: return "TransmittedA";
  case Fate::TransmittedB: return "TransmittedB";
  case Fate::BlockedPlate: return "BlockedPlate";
  case Fate::BlockedBySize: return "BlockedBySize";
  case Fate::AbortedSingularity: return "AbortedSingularity";
  }
  return "?";
}

std::string to_string(NearField mode)
{
  return mode == NearField::Bridge ? "bridge" : "direct";
}

NearField near_field_from_string(const std::string& s)
{
  if (s == "bridge")
    return NearField::Bridge;
  if (s == "direct")
    return NearField::Direct;
  throw ConfigError("unknown near-field mode '" + s + "'");
}

Fate fate_from_string(const std::string& s)
{
  for (Fate f : {Fate::TransmittedA, Fate::TransmittedB, Fate::BlockedPlate, Fate::BlockedBySize,
                 Fate::AbortedSingularity})
    if (to_string(f) == s)
      return f;
  throw ConfigError("unknown fate '" + s + "'");
}

void IntegratorConfig::validate() const
{
  if (!(dt_min > 0 && dt_min <= dt_max))
    throw ConfigError("integrator needs 0 < dt_min <= dt_max");
  if (!(rel_tol > 0) || !(abs_tol > 0))
    throw ConfigError("integrator tolerances must be > 0");
  if (!(rho_floor > 0))
    throw ConfigError("integrator rho_floor must be > 0");
  if (!(v_cap > 0) || !(max_displacement > 0) || !(max_relative_step >= 0))
    throw ConfigError("integrator caps must be positive");
  if (record_points < 0 || !(record_first > 0))
    throw ConfigError("integrator record settings are invalid");
  if (!(bridge_fresnel_ratio > 0) || !(bridge_max_fraction > 0 && bridge_max_fraction < 1) ||
      !(bridge_extent > 0))
    throw ConfigError("integrator bridge settings are invalid");
}

double velocity_scaled(double x, double t, const WaveField& field, const IntegratorConfig& icfg,
                       double factor)
{
  const WaveSample s = field.evaluate(x, t);
  if (!(s.rho >= icfg.rho_floor * field.reference_density(t))) {
    std::ostringstream msg;
    msg << "density " << s.rho << " below floor at x = " << x << ", t = " << t;
    throw SingularityError(msg.str());
  }
  const double hbar_m = field.consts().hbar / field.species().mass;
  return factor * hbar_m * (s.dpsi_dx / s.psi).imag();
}

double velocity(double x, double t, const WaveField& field, const IntegratorConfig& icfg)
{
  return velocity_scaled(x, t, field, icfg, 1.0);
}

double preslit_position(double x0, double t, const BeamConfig& beam,
                        const ParticleSpecies& species, const PhysicalConstants& consts)
{
  return x0 * (sigma_t(t, beam, species, consts) / beam.sigma0);
}

Fate classify_at_slits(double x_t1, const ApertureSet& apertures, const ParticleSpecies& species,
                       TransmissionMode mode, bool filter_size)
{
  const long idx = apertures.find(x_t1);
  if (idx < 0)
    return Fate::BlockedPlate;
  const Aperture& ap = apertures[static_cast<std::size_t>(idx)];
  if (filter_size && !transmits(ap, species, x_t1, mode))
    return Fate::BlockedBySize;
  return ap.group == ApertureGroup::A ? Fate::TransmittedA : Fate::TransmittedB;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense output coefficients (Hairer & Wanner, DOPRI5).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct DenseStep {
  double t0, h, x0, x1;
  std::array<double, 5> r; // rcont1..5

  double x_at(double t) const
  {
    const double th = (t - t0) / h;
    const double th1 = 1 - th;
    return r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
  }
  // derivative of the continuous extension
  double v_at(double t) const
  {
    const double th = (t - t0) / h;
    const double th1 = 1 - th;
    // d/dth of r0 + th (r1 + th1 (r2 + th (r3 + th1 r4)))
    const double inner3 = r[3] + th1 * r[4];
    const double inner2 = r[2] + th * inner3;
    const double dinner3 = -r[4];
    const double dinner2 = inner3 + th * dinner3;
    const double inner1 = r[1] + th1 * inner2;
    const double dinner1 = -inner2 + th1 * dinner2;
    return (inner1 + th * dinner1) / h;
  }
};

} // namespace

IntegrationResult integrate_guidance(double x_start, double t_start, double t_end,
                                     const WaveField& field, const IntegratorConfig& icfg,
                                     std::span<const double> record_times, double factor)
{
  IntegrationResult res;
  const auto f = [&](double t, double x) { return velocity_scaled(x, t, field, icfg, factor); };
  const auto fail = [&](const std::string& why) {
    res.ok = false;
    res.error = why;
    return res;
  };

  std::size_t next_record = 0;
  while (next_record < record_times.size() && record_times[next_record] <= t_start)
    ++next_record;

  double t = t_start;
  double x = x_start;
  double h = icfg.dt_min;
  double k1 = 0;
  try {
    k1 = f(t, x);
  } catch (const SingularityError& e) {
    return fail(e.what());
  }
  if (!(std::abs(k1) <= icfg.v_cap))
    return fail("initial guidance velocity exceeds v_cap");

  constexpr double safety = 0.9, grow_max = 5.0, shrink_min = 0.2;
  while (t < t_end) {
    // step caps: displacement per step, relative step size, dt_max
    double cap = icfg.dt_max;
    if (k1 != 0.0) {
      const double disp_cap = icfg.max_displacement / std::abs(k1);
      const double rel_cap = icfg.max_relative_step * (t - t_start);
      cap = std::min(cap, std::max(disp_cap, rel_cap));
    }
    h = std::clamp(std::min(h, cap), icfg.dt_min, icfg.dt_max);
    bool last = false;
    if (t + h >= t_end || t_end - (t + h) < icfg.dt_min) {
      h = t_end - t;
      last = true;
    }

    double k2, k3, k4, k5, k6, k7, x_new, err;
    bool capped = false;
    try {
      k2 = f(t + c2 * h, x + h * a21 * k1);
      k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
      k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      x_new = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = f(t + h, x_new);
      for (double k : {k2, k3, k4, k5, k6, k7})
        if (!(std::abs(k) <= icfg.v_cap))
          capped = true;
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    } catch (const SingularityError& e) {
      if (h <= icfg.dt_min * 1.0000001)
        return fail(e.what());
      h = std::max(icfg.dt_min, 0.25 * h);
      ++res.rejected;
      continue;
    }

    const double scale = icfg.abs_tol + icfg.rel_tol * std::max(std::abs(x), std::abs(x_new));
    const double ratio = std::abs(err) / scale;
    if (capped || !(ratio <= 1.0)) {
      if (h <= icfg.dt_min * 1.0000001) {
        if (capped)
          return fail("guidance velocity exceeds v_cap at dt_min");
        return fail("step underflow: dt_min reached with error above tolerance");
      }
      const double fac = capped ? 0.25 : std::max(shrink_min, safety * std::pow(ratio, -0.2));
      h = std::max(icfg.dt_min, h * fac);
      ++res.rejected;
      continue;
    }

    // accepted: emit record times inside (t, t + h]
    const double t_new = last ? t_end : t + h;
    if (next_record < record_times.size() && record_times[next_record] <= t_new) {
      DenseStep ds{t, h, x, x_new, {}};
      const double dx = x_new - x;
      const double bspl = h * k1 - dx;
      ds.r = {x, dx, bspl, dx - h * k7 - bspl,
              h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7)};
      while (next_record < record_times.size() && record_times[next_record] <= t_new) {
        const double tr = record_times[next_record++];
        if (tr < t_end)
          res.samples.push_back({tr, ds.x_at(tr), ds.v_at(tr)});
      }
    }
    t = t_new;
    x = x_new;
    k1 = k7;
    ++res.steps;
    const double fac = ratio > 0 ? std::min(grow_max, safety * std::pow(ratio, -0.2)) : grow_max;
    h *= fac;
    if (last)
      break;
  }
  res.samples.push_back({t_end, x, k1});
  return res;
}

std::vector<double> post_slit_record_times(double t1, double t_start, double t2,
                                           const IntegratorConfig& icfg)
{
  std::vector<double> times;
  const double first = std::max(icfg.record_first, t_start - t1);
  const double span = t2 - t1;
  if (icfg.record_points <= 0 || first >= span)
    return times;
  const int n = icfg.record_points;
  times.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    times.push_back(t1 + first * std::pow(span / first, static_cast<double>(j) / n));
  return times;
}

// NearFieldBridge -------------------------------------------------------------

namespace {

constexpr int kBridgeNodes = 10;

double bridge_time(const PropagationContext& ctx, double t2, const IntegratorConfig& icfg)
{
  double w_max = 0;
  for (const auto& ap : ctx.apertures())
    w_max = std::max(w_max, ap.width);
  const double l = icfg.bridge_fresnel_ratio * w_max;
  const double tau = ctx.species().mass * l * l / (2.0 * ctx.consts().hbar);
  return ctx.t1() + std::min(tau, icfg.bridge_max_fraction * (t2 - ctx.t1()));
}

} // namespace

NearFieldBridge::NearFieldBridge(const WaveField& field, double t2, const IntegratorConfig& icfg)
    : field_(field)
{
  if (!field.has_slits())
    throw ConfigError("near-field bridge needs a field with a slit plane");
  const PropagationContext& ctx = field.context();
  const double t1 = ctx.t1();
  if (!(t2 > t1))
    throw ConfigError("near-field bridge needs t2 > t1");
  t_bridge_ = bridge_time(ctx, t2, icfg);

  // slit-plane masses
  const auto& gl = gauss_legendre(20);
  aperture_mass_before_.reserve(ctx.apertures().size());
  double acc = 0;
  for (const auto& ap : ctx.apertures()) {
    aperture_mass_before_.push_back(acc);
    const double hw = 0.5 * ap.width;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k)
      acc += hw * gl.weights[k] *
             std::norm(psi_free(ap.center + hw * gl.nodes[k], t1, ctx.beam(), ctx.species(),
                                ctx.consts()));
  }
  total_ = acc;

  // Panel width: half the period of the fastest fringe, 2 pi / (2 beta D).
  const double left = ctx.apertures()[0].left();
  const double right = ctx.apertures()[ctx.apertures().size() - 1].right();
  const double extent = right - left;
  double w_min = std::numeric_limits<double>::infinity();
  for (const auto& ap : ctx.apertures())
    w_min = std::min(w_min, ap.width);
  const double beta = ctx.beta(t_bridge_);
  const double tau = t_bridge_ - t1;
  const double spread = ctx.consts().h * tau / (ctx.species().mass * w_min);
  center_ = 0.5 * (left + right);
  const double half = 0.5 * extent + icfg.bridge_extent * spread;
  const double panel = 0.5 * std::numbers::pi / (beta * extent);
  const auto n_panels = static_cast<std::size_t>(std::ceil(2.0 * half / panel));
  if (n_panels > 20'000'000)
    throw NumericError("near-field bridge table would need more than 2e7 panels");

  edges_.resize(n_panels + 1);
  cumulative_.resize(n_panels + 1);
  const double width = 2.0 * half / static_cast<double>(n_panels);
  const auto& rule = gauss_legendre(kBridgeNodes);
  // tail coefficient fits: mean of rho (x - x_c)^2 over the outer quarter
  double fit_left = 0, fit_right = 0, fit_len = 0;
  const double inner_edge = 0.75 * half;
  edges_[0] = center_ - half;
  cumulative_[0] = 0.0;
  for (std::size_t i = 0; i < n_panels; ++i) {
    const double a = center_ - half + static_cast<double>(i) * width;
    const double b = a + width;
    const double mid = 0.5 * (a + b);
    double m = 0, moment = 0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double x = mid + 0.5 * width * rule.nodes[k];
      const double r = field_.evaluate(x, t_bridge_).rho;
      const double wgt = 0.5 * width * rule.weights[k];
      m += wgt * r;
      moment += wgt * r * (x - center_) * (x - center_);
    }
    edges_[i + 1] = b;
    cumulative_[i + 1] = cumulative_[i] + m;
    if (mid - center_ <= -inner_edge)
      fit_left += moment;
    else if (mid - center_ >= inner_edge)
      fit_right += moment;
    if (mid - center_ >= inner_edge)
      fit_len += width;
  }
  c_left_ = fit_left / fit_len;
  c_right_ = fit_right / fit_len;
  tail_left_ = c_left_ / half;
  tail_right_ = c_right_ / half;
  const double inner = cumulative_.back();
  defect_ = total_ - (inner + tail_left_ + tail_right_);
  const double tails = tail_left_ + tail_right_;
  if (tails > 0) {
    const double scale = std::max(0.0, (total_ - inner) / tails);
    tail_left_ *= scale;
    tail_right_ *= scale;
    c_left_ *= scale;
    c_right_ *= scale;
  }
  for (auto& c : cumulative_)
    c += tail_left_;
}

double NearFieldBridge::rho(double x) const { return field_.evaluate(x, t_bridge_).rho; }

double NearFieldBridge::integrate(double a, double b) const
{
  const auto& rule = gauss_legendre(kBridgeNodes);
  const double mid = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  double s = 0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    s += rule.weights[k] * rho(mid + hw * rule.nodes[k]);
  return hw * s;
}

double NearFieldBridge::slit_plane_mass(double x_t1) const
{
  const PropagationContext& ctx = field_.context();
  const long idx = ctx.apertures().find(x_t1);
  if (idx < 0)
    throw ConfigError("slit_plane_mass: x_t1 is not inside an aperture");
  const Aperture& ap = ctx.apertures()[static_cast<std::size_t>(idx)];
  const auto& gl = gauss_legendre(20);
  const double hw = 0.5 * (x_t1 - ap.left());
  const double mid = ap.left() + hw;
  double s = 0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k)
    s += gl.weights[k] *
         std::norm(psi_free(mid + hw * gl.nodes[k], ctx.t1(), ctx.beam(), ctx.species(),
                            ctx.consts()));
  return aperture_mass_before_[static_cast<std::size_t>(idx)] + hw * s;
}

double NearFieldBridge::position(double q) const
{
  if (!(q >= 0 && q <= total_))
    throw ConfigError("bridge position: mass coordinate out of range");
  const double half = edges_.back() - center_;
  if (q <= cumulative_.front()) {
    if (c_left_ <= 0 || q <= 0)
      return edges_.front();
    return center_ - std::max(half, c_left_ / q);
  }
  if (q >= cumulative_.back()) {
    const double rest = total_ - q;
    if (c_right_ <= 0 || rest <= 0)
      return edges_.back();
    return center_ + std::max(half, c_right_ / rest);
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), q);
  const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const double a = edges_[i], b = edges_[i + 1];
  const double target = q - cumulative_[i];
  // safeguarded Newton on F(x) = int_a^x rho - target, F(a) <= 0 <= F(b)
  double lo = a, hi = b;
  const double span = cumulative_[i + 1] - cumulative_[i];
  double x = span > 0 ? a + (b - a) * (target / span) : 0.5 * (a + b);
  for (int iter = 0; iter < 50; ++iter) {
    const double f = integrate(a, x) - target;
    if (f > 0)
      hi = x;
    else
      lo = x;
    const double r = rho(x);
    double next = r > 0 ? x - f / r : 0.5 * (lo + hi);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(std::abs(x), (b - a)) || hi - lo <= 1e-15 * (b - a))
      return next;
    x = next;
  }
  return x;
}

IntegrationResult integrate_post_slit(double x_t1, double t1, double t2, const WaveField& field,
                                      const IntegratorConfig& icfg, const NearFieldBridge* bridge)
{
  if (icfg.near_field == NearField::Direct || !field.has_slits()) {
    const double t_start = t1 + icfg.dt_min;
    const auto record = post_slit_record_times(t1, t_start, t2, icfg);
    return integrate_guidance(x_t1, t_start, t2, field, icfg, record);
  }
  std::optional<NearFieldBridge> own;
  if (bridge == nullptr) {
    own.emplace(field, t2, icfg);
    bridge = &*own;
  }
  const double t_start = bridge->time();
  const double x_start = bridge->position(bridge->slit_plane_mass(x_t1));
  const auto record = post_slit_record_times(t1, t_start, t2, icfg);
  return integrate_guidance(x_start, t_start, t2, field, icfg, record);
}

} // namespace bohmsim
